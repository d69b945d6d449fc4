"""Per-unit conversion, preconditioning and OPF solvers."""

from .ac import solve_ac_opf
from .dc import solve_dc_opf
from .network import (
    DEFAULT_PLAN,
    PuNetwork,
    RelaxationPlan,
    apply_relaxation,
    decommit_generators,
    enforce_impedance_consistency,
    matpower_to_network,
    network_to_matpower,
    read_model_json,
    to_per_unit,
    write_model_json,
)
from .solution import OpfSolution

__all__ = [
    "DEFAULT_PLAN",
    "OpfSolution",
    "PuNetwork",
    "RelaxationPlan",
    "apply_relaxation",
    "decommit_generators",
    "enforce_impedance_consistency",
    "matpower_to_network",
    "network_to_matpower",
    "read_model_json",
    "solve_ac_opf",
    "solve_dc_opf",
    "to_per_unit",
    "write_model_json",
]
