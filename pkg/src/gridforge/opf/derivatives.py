"""Admittance matrices and polar power-flow derivatives.

All functions are sparse and follow the complex-matrix forms commonly used
by interior-point OPF codes; each is checked against finite differences in
the test-suite.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def make_ybus(net):
    """(Ybus, Yf, Yt, Cf, Ct) for the pi-model branches and bus shunts."""
    n, m = net.n_bus, net.n_branch
    ys = 1.0 / (net.r + 1j * net.x)
    bc = net.b
    ytt = ys + 0.5j * bc
    yff = ytt
    yft = -ys
    ytf = -ys
    idx = np.arange(m)
    Cf = sp.csr_matrix((np.ones(m), (idx, net.f)), shape=(m, n))
    Ct = sp.csr_matrix((np.ones(m), (idx, net.t)), shape=(m, n))
    Yf = sp.csr_matrix((np.r_[yff, yft], (np.r_[idx, idx], np.r_[net.f, net.t])), shape=(m, n))
    Yt = sp.csr_matrix((np.r_[ytf, ytt], (np.r_[idx, idx], np.r_[net.f, net.t])), shape=(m, n))
    ysh = net.gs + 1j * net.bs
    Ybus = (Cf.T @ Yf + Ct.T @ Yt + sp.diags(ysh)).tocsr()
    return Ybus, Yf.tocsr(), Yt.tocsr(), Cf, Ct


def _d(v):
    return sp.diags(v, format="csr")


def dSbus_dV(Ybus, V):
    """(dS/dVa, dS/dVm) of S = V conj(Ybus V)."""
    Ibus = Ybus @ V
    Vn = V / np.abs(V)
    dVm = _d(V) @ (Ybus @ _d(Vn)).conj() + _d(np.conj(Ibus)) @ _d(Vn)
    dVa = 1j * _d(V) @ (_d(Ibus) - Ybus @ _d(V)).conj()
    return dVa.tocsr(), dVm.tocsr()


def d2Sbus_dV2(Ybus, V, lam):
    """Second derivatives of lam' S(V): (Gaa, Gav, Gva, Gvv)."""
    Ibus = Ybus @ V
    A = _d(lam * V)
    B = Ybus @ _d(V)
    C = A @ B.conj()
    D = Ybus.conj().T @ _d(V)
    E = _d(np.conj(V)) @ (D @ _d(lam) - _d(D @ lam))
    F = C - A @ _d(np.conj(Ibus))
    G = _d(1.0 / np.abs(V))
    Gaa = E + F
    Gva = 1j * G @ (E - F)
    Gav = Gva.T
    Gvv = G @ (C + C.T) @ G
    return Gaa, Gav, Gva, Gvv


def dSbr_dV(Ybr, Cbr, V):
    """(dSbr/dVa, dSbr/dVm, Sbr) for flows at the ``Cbr`` end."""
    Ibr = Ybr @ V
    Vbr = Cbr @ V
    Vn = V / np.abs(V)
    dVa = 1j * (_d(np.conj(Ibr)) @ Cbr @ _d(V) - _d(Vbr) @ (Ybr @ _d(V)).conj())
    dVm = _d(Vbr) @ (Ybr @ _d(Vn)).conj() + _d(np.conj(Ibr)) @ Cbr @ _d(Vn)
    return dVa.tocsr(), dVm.tocsr(), Vbr * np.conj(Ibr)


def d2Sbr_dV2(Cbr, Ybr, V, lam):
    """Second derivatives of lam' Sbr(V) with complex ``lam``."""
    A = Ybr.conj().T @ _d(lam) @ Cbr
    B = _d(np.conj(V)) @ A @ _d(V)
    D = _d((A @ V) * np.conj(V))
    E = _d((A.T @ np.conj(V)) * V)
    F = B + B.T
    G = _d(1.0 / np.abs(V))
    Haa = F - D - E
    Hva = 1j * G @ (B - B.T - D + E)
    Hav = Hva.T
    Hvv = G @ F @ G
    return Haa, Hav, Hva, Hvv


def dAbr_dV(dSa, dSm, S):
    """Derivatives of |Sbr|^2."""
    dAa = 2 * (_d(S.real) @ dSa.real + _d(S.imag) @ dSa.imag)
    dAm = 2 * (_d(S.real) @ dSm.real + _d(S.imag) @ dSm.imag)
    return dAa.tocsr(), dAm.tocsr()


def d2ASbr_dV2(dSa, dSm, S, Cbr, Ybr, V, lam):
    """Second derivatives of lam' |Sbr|^2 (real ``lam``)."""
    Saa, Sav, Sva, Svv = d2Sbr_dV2(Cbr, Ybr, V, np.conj(S) * lam)
    L = _d(lam)
    Haa = 2 * (Saa + dSa.T @ L @ dSa.conj()).real
    Hva = 2 * (Sva + dSm.T @ L @ dSa.conj()).real
    Hav = 2 * (Sav + dSa.T @ L @ dSm.conj()).real
    Hvv = 2 * (Svv + dSm.T @ L @ dSm.conj()).real
    return Haa, Hav, Hva, Hvv
