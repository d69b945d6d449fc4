"""Circuit-count reconciliation for a single line section."""

from __future__ import annotations

import logging

from .model import CircuitSpec

log = logging.getLogger(__name__)

MODES = ("trust_voltage", "trust_circuits")


def declared_circuit_count(section, diagnostics=None):
    """First pass: circuits tag, then cables / conductors-per-circuit, then 1."""
    if section.circuits_declared:
        return section.circuits_declared
    if section.cables:
        per = 2 if section.is_hvdc else 3
        if section.cables % per and diagnostics is not None:
            diagnostics["cables_not_divisible"] += 1
        return max(1, section.cables // per)
    return 1


def resolve_circuit_counts(section, mode="trust_voltage", diagnostics=None):
    """Expand a section into its circuits.

    Under ``trust_voltage`` a multi-voltage list overrides the declared
    count; a single voltage is repeated for every declared circuit.  Under
    ``trust_circuits`` the declared count is kept and surplus circuits go
    to the highest voltages first.
    """
    if mode not in MODES:
        raise ValueError(f"unknown circuit mode {mode!r}")
    volts = sorted(section.voltages_kv, reverse=True)
    if not volts:
        return []
    c = declared_circuit_count(section, diagnostics)
    n_v = len(volts)

    if n_v == 1:
        levels = volts * c
    elif mode == "trust_voltage" or n_v == c:
        levels = list(volts)
    elif n_v > c:
        levels = volts[:c]
    else:
        levels = [volts[i % n_v] for i in range(c)]

    out = []
    seen = {}
    for v in sorted(levels, reverse=True):
        k = seen.get(v, 0)
        seen[v] = k + 1
        out.append(CircuitSpec(voltage_kv=v, index=k, is_hvdc=section.is_hvdc))
    return out
