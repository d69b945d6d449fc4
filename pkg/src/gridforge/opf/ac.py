"""AC optimal power flow in polar voltage coordinates."""

from __future__ import annotations

import math
import time

import numpy as np
import scipy.sparse as sp

from .derivatives import d2ASbr_dV2, d2Sbus_dV2, dAbr_dV, dSbr_dV, dSbus_dV, make_ybus
from .network import apply_relaxation
from .pdipm import PdipmOptions, pdipm
from .solution import (
    INFEASIBLE,
    LOCALLY_SOLVED,
    TIMEOUT,
    VOLL_USD_PER_MWH,
    OpfSolution,
    classify_residual,
)

COST_SCALE = 1e-4
AC_TIMEOUT_S = 1800.0


class AcProblem:
    """Variable layout, objective and constraints of one AC-OPF instance.

    x = [Va, Vm, Pg, Qg, Pdc_fwd, Pdc_rev, Qdc_from, Qdc_to, served fraction]
    """

    def __init__(self, net):
        self.net = net
        n, ng, nd = net.n_bus, net.n_gen, net.n_dc
        self.Ybus, self.Yf, self.Yt, self.Cf, self.Ct = make_ybus(net)
        self.Cg = sp.csr_matrix((np.ones(ng), (net.gen_bus, np.arange(ng))), shape=(n, ng))
        self.Cdf = sp.csr_matrix((np.ones(nd), (net.dc_f, np.arange(nd))), shape=(n, nd))
        self.Cdt = sp.csr_matrix((np.ones(nd), (net.dc_t, np.arange(nd))), shape=(n, nd))
        self.keep = 1.0 - net.dc_loss1
        self.shed_bus = np.flatnonzero(net.pd > 0) if net.shedding else np.zeros(0, int)
        nl = len(self.shed_bus)
        self.Cl = sp.csr_matrix((np.ones(nl), (self.shed_bus, np.arange(nl))), shape=(n, nl))
        sizes = [("va", n), ("vm", n), ("pg", ng), ("qg", ng), ("pf", nd), ("pr", nd), ("qf", nd), ("qt", nd), ("s", nl)]
        self.sl, off = {}, 0
        for name, size in sizes:
            self.sl[name] = slice(off, off + size)
            off += size
        self.nx = off

        xmin = np.full(off, -np.inf)
        xmax = np.full(off, np.inf)
        xmin[self.sl["vm"]], xmax[self.sl["vm"]] = net.vmin, net.vmax
        xmin[self.sl["pg"]], xmax[self.sl["pg"]] = net.pmin, net.pmax
        xmin[self.sl["qg"]], xmax[self.sl["qg"]] = np.minimum(net.qmin, net.qmax), net.qmax
        for key in ("pf", "pr"):
            xmin[self.sl[key]], xmax[self.sl[key]] = 0.0, net.dc_pmax
        for key in ("qf", "qt"):
            xmin[self.sl[key]], xmax[self.sl[key]] = net.dc_qmin, net.dc_qmax
        xmin[self.sl["s"]], xmax[self.sl["s"]] = 0.0, 1.0
        ref = self.sl["va"].start + net.ref
        xmin[ref] = xmax[ref] = 0.0
        self.xmin, self.xmax = xmin, xmax
        fixed = np.isfinite(xmin) & (np.abs(xmax - xmin) <= 1e-12)
        self.fixed = np.flatnonzero(fixed)
        self.lower = np.flatnonzero(np.isfinite(xmin) & ~fixed)
        self.upper = np.flatnonzero(np.isfinite(xmax) & ~fixed)
        self.lim = np.flatnonzero(np.isfinite(net.rate))

        # constant Jacobians of the linear inequalities, columns = constraints
        m = net.n_branch
        rows = np.r_[np.arange(m), np.arange(m)]
        A_ang = sp.csr_matrix(
            (np.r_[np.ones(m), -np.ones(m)], (rows, np.r_[net.f, net.t])), shape=(m, n)
        )
        self.A_ang = A_ang
        lin = [sp.hstack([A_ang, sp.csr_matrix((m, off - n))]), -sp.hstack([A_ang, sp.csr_matrix((m, off - n))])]
        self.lin_rhs = [net.angmax, -net.angmin]
        if nl:
            row = np.zeros((1, off))
            row[0, self.sl["s"]] = net.pd[self.shed_bus]
            lin.append(sp.csr_matrix(row))
            self.lin_rhs.append(np.array([net.load_cap_frac * net.pmax.sum()]))
        eye = sp.identity(off, format="csr")
        lin += [eye[self.upper], -eye[self.lower]]
        self.lin_rhs += [xmax[self.upper], -xmin[self.lower]]
        self.A_lin = sp.vstack(lin, format="csr")
        self.b_lin = np.concatenate(self.lin_rhs)
        self.E_fix = eye[self.fixed]

    # -- pieces -----------------------------------------------------------

    def voltage(self, x):
        return x[self.sl["vm"]] * np.exp(1j * x[self.sl["va"]])

    def load(self, x):
        net = self.net
        pd, qd = net.pd.copy(), net.qd.copy()
        if len(self.shed_bus):
            s = x[self.sl["s"]]
            pd[self.shed_bus] *= s
            qd[self.shed_bus] *= s
        return pd, qd

    def cost(self, x):
        """Objective in $/h (unscaled)."""
        net = self.net
        pg = x[self.sl["pg"]]
        val = float(np.sum(net.c2 * pg**2 + net.c1 * pg + net.c0))
        if len(self.shed_bus):
            s = x[self.sl["s"]]
            val += VOLL_USD_PER_MWH * net.base_mva * float(np.sum((1 - s) * net.pd[self.shed_bus]))
        return val

    def f_fcn(self, x):
        net = self.net
        df = np.zeros(self.nx)
        pg = x[self.sl["pg"]]
        df[self.sl["pg"]] = 2 * net.c2 * pg + net.c1
        if len(self.shed_bus):
            df[self.sl["s"]] = -VOLL_USD_PER_MWH * net.base_mva * net.pd[self.shed_bus]
        return COST_SCALE * self.cost(x), COST_SCALE * df

    def mismatch(self, x):
        """Complex bus power mismatch S(V) + S_load - S_gen - S_dc (pu)."""
        V = self.voltage(x)
        pd, qd = self.load(x)
        pf, pr = x[self.sl["pf"]], x[self.sl["pr"]]
        p_dc = self.Cdf @ (pf - self.keep * pr) + self.Cdt @ (pr - self.keep * pf + self.net.dc_loss0)
        q_dc = self.Cdf @ x[self.sl["qf"]] + self.Cdt @ x[self.sl["qt"]]
        Sbus = V * np.conj(self.Ybus @ V)
        Sg = self.Cg @ (x[self.sl["pg"]] + 1j * x[self.sl["qg"]])
        return Sbus + pd + 1j * qd - Sg + p_dc - 1j * q_dc

    def gh_fcn(self, x):
        net = self.net
        n, nx = net.n_bus, self.nx
        V = self.voltage(x)
        mis = self.mismatch(x)
        g = np.r_[mis.real, mis.imag, x[self.fixed] - self.xmin[self.fixed]]

        dVa, dVm = dSbus_dV(self.Ybus, V)
        nd = net.n_dc
        Pcols = [dVa.real, dVm.real, -self.Cg, sp.csr_matrix((n, net.n_gen)),
                 self.Cdf - self.Cdt @ sp.diags(self.keep), -self.Cdf @ sp.diags(self.keep) + self.Cdt,
                 sp.csr_matrix((n, nd)), sp.csr_matrix((n, nd))]
        Qcols = [dVa.imag, dVm.imag, sp.csr_matrix((n, net.n_gen)), -self.Cg,
                 sp.csr_matrix((n, nd)), sp.csr_matrix((n, nd)), -self.Cdf, -self.Cdt]
        if len(self.shed_bus):
            Pcols.append(self.Cl @ sp.diags(net.pd[self.shed_bus]))
            Qcols.append(self.Cl @ sp.diags(net.qd[self.shed_bus]))
        dG = sp.vstack([sp.hstack(Pcols), sp.hstack(Qcols), self.E_fix], format="csr")

        h_parts = []
        dH_rows = []
        if len(self.lim):
            lim = self.lim
            for Ybr, Cbr in ((self.Yf, self.Cf), (self.Yt, self.Ct)):
                Y, C = Ybr[lim], Cbr[lim]
                dSa, dSm, S = dSbr_dV(Y, C, V)
                dAa, dAm = dAbr_dV(dSa, dSm, S)
                h_parts.append(np.abs(S) ** 2 - net.rate[lim] ** 2)
                dH_rows.append(sp.hstack([dAa, dAm, sp.csr_matrix((len(lim), nx - 2 * n))]))
        h_parts.append(self.A_lin @ x - self.b_lin)
        dH_rows.append(self.A_lin)
        h = np.concatenate(h_parts)
        dH = sp.vstack(dH_rows, format="csr")
        return h, g, dH.T.tocsr(), dG.T.tocsr()

    def hess_fcn(self, x, lam, mu):
        net = self.net
        n, nx = net.n_bus, self.nx
        V = self.voltage(x)
        lamP, lamQ = lam[:n], lam[n:2 * n]
        Gaa, Gav, Gva, Gvv = d2Sbus_dV2(self.Ybus, V, lamP)
        Qaa, Qav, Qva, Qvv = d2Sbus_dV2(self.Ybus, V, lamQ)
        Haa = Gaa.real + Qaa.imag
        Hav = Gav.real + Qav.imag
        Hva = Gva.real + Qva.imag
        Hvv = Gvv.real + Qvv.imag
        nlim = len(self.lim)
        if nlim:
            lim = self.lim
            for k, (Ybr, Cbr) in enumerate(((self.Yf, self.Cf), (self.Yt, self.Ct))):
                Y, C = Ybr[lim], Cbr[lim]
                dSa, dSm, S = dSbr_dV(Y, C, V)
                m_ = mu[k * nlim:(k + 1) * nlim]
                Faa, Fav, Fva, Fvv = d2ASbr_dV2(dSa, dSm, S, C, Y, V, m_)
                Haa, Hav, Hva, Hvv = Haa + Faa, Hav + Fav, Hva + Fva, Hvv + Fvv
        Hv = sp.bmat([[Haa, Hav], [Hva, Hvv]], format="csr")
        pad = sp.csr_matrix((2 * n, nx - 2 * n))
        H = sp.bmat([[Hv, pad], [pad.T, None]], format="csr")
        diag = np.zeros(nx)
        diag[self.sl["pg"]] = COST_SCALE * 2 * net.c2
        return (H + sp.diags(diag)).tocsr()

    # -- starting point ---------------------------------------------------

    def start(self, warm=None):
        net = self.net
        x = np.zeros(self.nx)
        x[self.sl["vm"]] = 1.0
        x[self.sl["pg"]] = net.pg0
        if warm is not None and warm.va is not None:
            x[self.sl["va"]] = warm.va
            x[self.sl["pg"]] = warm.pg
            if warm.served is not None and len(self.shed_bus):
                x[self.sl["s"]] = warm.served[self.shed_bus] / net.pd[self.shed_bus]
        elif len(self.shed_bus):
            x[self.sl["s"]] = 1.0
        lo = np.where(np.isfinite(self.xmin), self.xmin, -np.inf)
        hi = np.where(np.isfinite(self.xmax), self.xmax, np.inf)
        x = np.clip(x, lo, hi)
        mid = np.isfinite(lo) & np.isfinite(hi)
        qg = self.sl["qg"]
        x[qg] = np.where(mid[qg], 0.5 * (lo[qg] + hi[qg]), x[qg])
        return x


def solve_ac_opf(net, level=None, ac1=False, warm_start=None, timeout_s=AC_TIMEOUT_S, max_it=10000):
    """Solve the AC-OPF of ``net`` (after applying ``level`` if given).

    ``warm_start`` is a DC solution whose angles and dispatch seed the
    iteration; voltage magnitudes start flat.
    """
    if level is not None:
        net = apply_relaxation(net, level, ac1)
    t0 = time.perf_counter()
    sol = OpfSolution(status=INFEASIBLE, formulation="ac", level=net.level, ac1=net.ac1,
                      base_mva=net.base_mva, demand_pu=float(net.pd.sum()))
    if not net.shedding and net.pmax.sum() < net.pd.sum():
        sol.message = "generation capacity below demand"
        return sol
    prob = AcProblem(net)
    x0 = prob.start(warm_start)
    deadline = time.monotonic() + timeout_s if timeout_s is not None else None
    res = pdipm(x0, prob.f_fcn, prob.gh_fcn, prob.hess_fcn, PdipmOptions(max_it=max_it, deadline=deadline))
    sol.solve_seconds = time.perf_counter() - t0
    sol.iterations = res.iterations
    sol.message = res.reason
    residual = max(res.max_violation, res.gradcond, res.compcond)
    sol.residual = residual
    if res.reason == "timeout":
        sol.status = TIMEOUT
    elif res.converged:
        sol.status = LOCALLY_SOLVED
    else:
        sol.status = classify_residual(residual)
    x = res.x
    V = prob.voltage(x)
    sol.va, sol.vm = np.angle(V), np.abs(V)
    sol.pg, sol.qg = x[prob.sl["pg"]].copy(), x[prob.sl["qg"]].copy()
    Sf = (prob.Cf @ V) * np.conj(prob.Yf @ V)
    St = (prob.Ct @ V) * np.conj(prob.Yt @ V)
    sol.p_from, sol.q_from, sol.p_to, sol.q_to = Sf.real, Sf.imag, St.real, St.imag
    pf, pr = x[prob.sl["pf"]], x[prob.sl["pr"]]
    sol.dc_p_from = pf - prob.keep * pr
    sol.dc_p_to = pr - prob.keep * pf + net.dc_loss0
    sol.served = prob.load(x)[0]
    sol.objective = prob.cost(x)
    sol.extra = {"qdc_from": x[prob.sl["qf"]].tolist(), "qdc_to": x[prob.sl["qt"]].tolist(),
                 "max_violation": res.max_violation, "gradcond": res.gradcond, "compcond": res.compcond}
    if not math.isfinite(sol.objective):
        sol.status = INFEASIBLE
    return sol
