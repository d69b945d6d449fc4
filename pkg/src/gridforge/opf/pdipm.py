"""Primal-dual interior-point method for smooth nonlinear programs.

Solves  min f(x)  s.t.  g(x) = 0,  h(x) <= 0  with Newton steps on the
perturbed KKT system, a log-barrier on the inequality slacks and a
fraction-to-boundary step rule.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

XI = 0.99995
SIGMA = 0.1
Z0 = 1.0


@dataclass
class PdipmOptions:
    feastol: float = 1e-6
    gradtol: float = 1e-6
    comptol: float = 1e-6
    costtol: float = 1e-6
    max_it: int = 10000
    deadline: float | None = None  # time.monotonic() value
    stall_window: int = 300


@dataclass
class PdipmResult:
    x: np.ndarray
    f: float
    converged: bool
    iterations: int
    lam: np.ndarray
    mu: np.ndarray
    feascond: float
    gradcond: float
    compcond: float
    costcond: float
    max_violation: float
    reason: str


def _norm(v):
    return float(np.max(np.abs(v))) if len(v) else 0.0


def pdipm(x0, f_fcn, gh_fcn, hess_fcn, opts=None):
    """Run the interior-point iteration from ``x0``.

    f_fcn(x) -> (f, df); gh_fcn(x) -> (h, g, dh, dg) with dh, dg of shape
    (nx, niq) / (nx, neq); hess_fcn(x, lam, mu) -> Hessian of the Lagrangian.
    """
    opts = opts or PdipmOptions()
    x = np.array(x0, dtype=float)
    nx = len(x)
    f, df = f_fcn(x)
    h, g, dh, dg = gh_fcn(x)
    niq, neq = len(h), len(g)
    lam = np.zeros(neq)
    z = np.full(niq, Z0)
    mu = z.copy()
    k = h < -Z0
    z[k] = -h[k]
    gamma = 1.0
    k = gamma / z > Z0
    mu[k] = gamma / z[k]
    e = np.ones(niq)
    f0 = f
    best, best_it = np.inf, 0
    reason = "max_it"
    converged = False
    it = 0
    feascond = gradcond = compcond = costcond = np.inf

    def conditions():
        Lx = df + dg @ lam + dh @ mu
        maxh = float(np.max(h)) if niq else 0.0
        feas = max(_norm(g), maxh) / (1 + max(_norm(x), _norm(z)))
        grad = _norm(Lx) / (1 + max(_norm(lam), _norm(mu)))
        comp = float(z @ mu) / (1 + _norm(x))
        return Lx, feas, grad, comp

    Lx, feascond, gradcond, compcond = conditions()
    costcond = 0.0
    while True:
        if feascond < opts.feastol and gradcond < opts.gradtol and compcond < opts.comptol and costcond < opts.costtol:
            converged, reason = True, "converged"
            break
        if it >= opts.max_it:
            break
        if opts.deadline is not None and time.monotonic() > opts.deadline:
            reason = "timeout"
            break
        merit = max(feascond, gradcond, compcond)
        if merit < 0.9 * best:
            best, best_it = merit, it
        elif it - best_it > opts.stall_window:
            reason = "stalled"
            break
        it += 1

        Lxx = hess_fcn(x, lam, mu)
        zinv = 1.0 / z
        dh_zinv = dh @ sp.diags(zinv)
        M = Lxx + dh_zinv @ sp.diags(mu) @ dh.T
        N = Lx + dh_zinv @ (mu * h + gamma * e)
        K = sp.bmat([[M, dg], [dg.T, None]], format="csc")
        rhs = np.r_[-N, -g]
        with warnings.catch_warnings():
            # a singular KKT matrix is handled below by regularising
            warnings.simplefilter("ignore", MatrixRankWarning)
            sol = spsolve(K, rhs)
            if not np.all(np.isfinite(sol)):
                reg = sp.diags(np.r_[np.full(nx, 1e-8), np.full(neq, -1e-8)], format="csc")
                sol = spsolve(K + reg, rhs)
            if not np.all(np.isfinite(sol)):
                reason = "singular"
                break
        dx, dlam = sol[:nx], sol[nx:]
        dz = -h - z - dh.T @ dx
        dmu = -mu + zinv * (gamma * e - mu * dz)

        alphap = alphad = 1.0
        neg = dz < 0
        if neg.any():
            alphap = min(XI * float(np.min(z[neg] / -dz[neg])), 1.0)
        neg = dmu < 0
        if neg.any():
            alphad = min(XI * float(np.min(mu[neg] / -dmu[neg])), 1.0)
        x = x + alphap * dx
        z = z + alphap * dz
        lam = lam + alphad * dlam
        mu = mu + alphad * dmu
        if niq:
            gamma = SIGMA * float(z @ mu) / niq

        f, df = f_fcn(x)
        h, g, dh, dg = gh_fcn(x)
        if not (np.all(np.isfinite(x)) and np.isfinite(f)):
            reason = "diverged"
            break
        Lx, feascond, gradcond, compcond = conditions()
        costcond = abs(f - f0) / (1 + abs(f0))
        f0 = f

    viol = max(_norm(g), float(np.max(h, initial=0.0)))
    return PdipmResult(
        x=x, f=f, converged=converged, iterations=it, lam=lam, mu=mu,
        feascond=feascond, gradcond=gradcond, compcond=compcond, costcond=costcond,
        max_violation=viol, reason=reason,
    )
