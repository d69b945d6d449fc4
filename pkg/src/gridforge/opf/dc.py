"""Linearized OPF as a sparse linear program."""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .network import apply_relaxation
from .solution import INFEASIBLE, LOCALLY_SOLVED, VOLL_USD_PER_MWH, OpfSolution

C2_TANGENTS = 12


def incidence(net):
    """Branch-bus incidence (+1 from, -1 to), shape (n_branch, n_bus)."""
    m, n = net.n_branch, net.n_bus
    rows = np.r_[np.arange(m), np.arange(m)]
    cols = np.r_[net.f, net.t]
    vals = np.r_[np.ones(m), -np.ones(m)]
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, n))


def gen_incidence(net):
    return sp.csr_matrix((np.ones(net.n_gen), (net.gen_bus, np.arange(net.n_gen))), shape=(net.n_bus, net.n_gen))


def solve_dc_opf(net, level=None, ac1=False):
    """Solve the DC-OPF of ``net``; ``level`` applies a relaxation first.

    Shedding variables (priced at VOLL) appear only when the level caps
    served load.  A quadratic cost term enters through tangent cuts.
    """
    if level is not None:
        net = apply_relaxation(net, level, ac1)
    t0 = time.perf_counter()
    n, m, ng, nd = net.n_bus, net.n_branch, net.n_gen, net.n_dc
    shed = net.shedding
    quad = np.flatnonzero(net.c2 > 0)
    nq = len(quad)
    ns = n if shed else 0
    # variable blocks
    o_th, o_pg = 0, n
    o_pf = o_pg + ng
    o_pr = o_pf + nd
    o_sh = o_pr + nd
    o_t = o_sh + ns
    nv = o_t + nq

    A = incidence(net)
    bx = sp.diags(1.0 / net.x)
    Bf = bx @ A  # branch flow = Bf theta
    Cg = gen_incidence(net)
    Cf = sp.csr_matrix((np.ones(nd), (net.dc_f, np.arange(nd))), shape=(n, nd))
    Ct = sp.csr_matrix((np.ones(nd), (net.dc_t, np.arange(nd))), shape=(n, nd))
    keep = 1.0 - net.dc_loss1

    blocks = [-(A.T @ Bf), Cg, -Cf + Ct @ sp.diags(keep), Cf @ sp.diags(keep) - Ct]
    if shed:
        blocks.append(sp.identity(n))
    if nq:
        blocks.append(sp.csr_matrix((n, nq)))
    A_eq = sp.hstack(blocks, format="csr")
    b_eq = net.pd + Ct @ net.dc_loss0

    rows, rhs = [], []

    def pad(mat, offset, width):
        left = sp.csr_matrix((mat.shape[0], offset))
        right = sp.csr_matrix((mat.shape[0], nv - offset - width))
        return sp.hstack([left, mat, right], format="csr")

    lim = np.isfinite(net.rate)
    if lim.any():
        rows += [pad(Bf[lim], o_th, n), pad(-Bf[lim], o_th, n)]
        rhs += [net.rate[lim], net.rate[lim]]
    rows += [pad(A, o_th, n), pad(-A, o_th, n)]
    rhs += [net.angmax, -net.angmin]
    if shed:
        cap = net.load_cap_frac * net.pmax.sum() - net.pd.sum()
        rows.append(pad(sp.csr_matrix(-np.ones((1, n))), o_sh, n))
        rhs.append(np.array([cap]))
    for j, g in enumerate(quad):
        pts = np.linspace(0.0, max(net.pmax[g], 1e-6), C2_TANGENTS)
        cut = sp.lil_matrix((len(pts), nv))
        cut[:, o_pg + g] = (net.c1[g] + 2 * net.c2[g] * pts).reshape(-1, 1)
        cut[:, o_t + j] = -1.0
        rows.append(cut.tocsr())
        rhs.append(net.c2[g] * pts**2)
    A_ub = sp.vstack(rows, format="csr")
    b_ub = np.concatenate(rhs)

    c = np.zeros(nv)
    c[o_pg:o_pg + ng] = net.c1
    c[o_pg + quad] = 0.0
    c[o_t:o_t + nq] = 1.0
    if shed:
        c[o_sh:o_sh + n] = VOLL_USD_PER_MWH * net.base_mva

    bounds = [(None, None)] * n
    bounds[net.ref] = (0.0, 0.0)
    bounds += list(zip(net.pmin, net.pmax))
    bounds += [(0.0, p) for p in net.dc_pmax] * 2
    bounds += [(0.0, p) for p in net.pd] if shed else []
    bounds += [(None, None)] * nq

    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    elapsed = time.perf_counter() - t0
    sol = OpfSolution(
        status=LOCALLY_SOLVED if res.status == 0 else INFEASIBLE,
        formulation="dc",
        level=net.level,
        ac1=net.ac1,
        solve_seconds=elapsed,
        base_mva=net.base_mva,
        demand_pu=float(net.pd.sum()),
        message=res.message,
        iterations=int(getattr(res, "nit", 0) or 0),
    )
    if res.status != 0:
        return sol
    xv = res.x
    th = xv[o_th:o_th + n]
    pg = xv[o_pg:o_pg + ng]
    pf, pr = xv[o_pf:o_pf + nd], xv[o_pr:o_pr + nd]
    sigma = xv[o_sh:o_sh + n] if shed else np.zeros(n)
    flow = Bf @ th
    sol.va, sol.vm = th, np.ones(n)
    sol.pg, sol.qg = pg, np.zeros(ng)
    sol.p_from, sol.p_to = flow, -flow
    sol.q_from, sol.q_to = np.zeros(m), np.zeros(m)
    sol.dc_p_from = pf - keep * pr
    sol.dc_p_to = pr - keep * pf + net.dc_loss0
    sol.served = net.pd - sigma
    sol.objective = float(res.fun + net.c0.sum())
    sol.residual = float(np.max(np.abs(A_eq @ xv - b_eq), initial=0.0))
    return sol
