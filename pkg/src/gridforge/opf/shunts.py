"""Reactive-balance shunt sizing from a DC dispatch."""

from __future__ import annotations

import numpy as np

SHUNT_MARGIN = 0.15


def reactive_balance(net, dc_solution):
    """Per-bus reactive need, line charging and generator capability (pu).

    Branch reactive loss P^2 x is split evenly between the two ends.
    """
    n = net.n_bus
    flow = dc_solution.p_from if dc_solution is not None and dc_solution.p_from is not None else np.zeros(net.n_branch)
    q_loss = flow**2 * net.x
    need = net.qd.copy()
    np.add.at(need, net.f, 0.5 * q_loss)
    np.add.at(need, net.t, 0.5 * q_loss)
    charging = np.maximum(net.bs, 0.0).copy()
    np.add.at(charging, net.f, 0.5 * net.b)
    np.add.at(charging, net.t, 0.5 * net.b)
    qmax = np.zeros(n)
    qmin = np.zeros(n)
    np.add.at(qmax, net.gen_bus, net.qmax)
    np.add.at(qmin, net.gen_bus, net.qmin)
    return need, charging, qmax, qmin


def inject_shunts(net, dc_solution, margin=SHUNT_MARGIN):
    """Copy of ``net`` with capacitors at deficit buses and reactors at surplus buses.

    A capacitor is added where need exceeds charging plus generator Q_max
    by more than ``margin`` of the need; a reactor where charging exceeds
    need plus generator absorption by more than ``margin`` of the charging.
    Each shunt is sized to the imbalance.  Returns ``(net, added)`` with
    ``added`` mapping bus index -> pu susceptance.
    """
    out = net.copy()
    need, charging, qmax, qmin = reactive_balance(net, dc_solution)
    added = {}
    for i in range(net.n_bus):
        deficit = need[i] - charging[i] - qmax[i]
        surplus = charging[i] - need[i] + qmin[i]
        if deficit > 0 and deficit > margin * need[i]:
            added[i] = float(deficit)
        elif surplus > 0 and surplus > margin * charging[i]:
            added[i] = -float(surplus)
    for i, bs in added.items():
        out.bs[i] += bs
    out.diagnostics["capacitors"] += sum(1 for v in added.values() if v > 0)
    out.diagnostics["reactors"] += sum(1 for v in added.values() if v < 0)
    return out, added
