"""Solver result record."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOCALLY_SOLVED = "locally_solved"
ALMOST_LOCALLY_SOLVED = "almost_locally_solved"
INFEASIBLE = "infeasible"
TIMEOUT = "timeout"
SUCCESS = (LOCALLY_SOLVED, ALMOST_LOCALLY_SOLVED)

STRICT_TOL = 1e-4
ACCEPTABLE_TOL = 1e-2
VOLL_USD_PER_MWH = 10000.0


def classify_residual(residual):
    if residual <= STRICT_TOL:
        return LOCALLY_SOLVED
    if residual <= ACCEPTABLE_TOL:
        return ALMOST_LOCALLY_SOLVED
    return INFEASIBLE


@dataclass
class OpfSolution:
    status: str
    formulation: str  # dc | ac
    level: str
    ac1: bool = False
    objective: float = float("nan")  # $/h, including any shedding penalty
    va: np.ndarray | None = None  # rad
    vm: np.ndarray | None = None
    pg: np.ndarray | None = None  # pu
    qg: np.ndarray | None = None
    p_from: np.ndarray | None = None
    q_from: np.ndarray | None = None
    p_to: np.ndarray | None = None
    q_to: np.ndarray | None = None
    dc_p_from: np.ndarray | None = None  # pu withdrawn at each link's from bus
    dc_p_to: np.ndarray | None = None
    served: np.ndarray | None = None  # pu load served per bus
    iterations: int = 0
    residual: float = float("nan")
    solve_seconds: float = 0.0
    base_mva: float = 100.0
    demand_pu: float = 0.0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status in SUCCESS

    @property
    def total_generation_mw(self):
        return float(np.sum(self.pg)) * self.base_mva if self.pg is not None else float("nan")

    @property
    def served_mw(self):
        return float(np.sum(self.served)) * self.base_mva if self.served is not None else float("nan")

    @property
    def shed_mw(self):
        return self.demand_pu * self.base_mva - self.served_mw

    @property
    def total_loss_mw(self):
        """Branch plus DC-link losses (= generation minus served load)."""
        if self.p_from is None:
            return float("nan")
        branch = float(np.sum(self.p_from + self.p_to))
        links = float(np.sum(self.dc_p_from + self.dc_p_to)) if self.dc_p_from is not None else 0.0
        return (branch + links) * self.base_mva

    @property
    def loss_pct(self):
        """(generation - demanded load) / demanded load; negative under shedding."""
        d = self.demand_pu * self.base_mva
        return 100.0 * (self.total_generation_mw - d) / d if d > 0 else float("nan")
