"""Acceptance criteria 1-10; each test prints one PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``.
"""

import math
import time
from fractions import Fraction
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from conftest import certified_networks, topology_violations
from gridforge.demand import merit_order_dispatch
from gridforge.opf import solve_ac_opf, solve_dc_opf
from gridforge.opf.derivatives import dSbr_dV, dSbus_dV, make_ybus
from gridforge.opf.ladder import progressive_solve
from gridforge.parameters import (
    apply_scaling_factors,
    auto_transformer_factor,
    generator_costs,
    generator_limits,
    line_parameters,
    scaling_factors,
)
from gridforge.pipeline import RunConfig, run_pipeline
from gridforge.synthetic import random_pu_network, two_bus_network
from gridforge.topology import Branch, Generator
from oracles import ac_bus_residual, dc_opf_vertex_enumeration


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return emit


def binding_dc_cases(count):
    """Lossless 3-5 bus networks with the heaviest branch rated below its free flow."""
    out, seed = [], 0
    while len(out) < count:
        net = random_pu_network(3 + seed % 3, seed=seed, lossless=True)
        seed += 1
        free = solve_dc_opf(net)
        k = int(np.argmax(np.abs(free.p_from)))
        net.rate = np.full(net.n_branch, np.inf)
        net.rate[k] = 0.8 * abs(free.p_from[k])
        if dc_opf_vertex_enumeration(net) is not None:
            out.append(net)
    return out


def test_criterion_01_dc_oracle(verdict):
    nets = binding_dc_cases(10)
    refs = [dc_opf_vertex_enumeration(n) for n in nets]
    t0 = time.perf_counter()
    sols = [solve_dc_opf(n) for n in nets]
    elapsed = time.perf_counter() - t0
    worst = max(abs(s.objective - r) / abs(r) for s, r in zip(sols, refs))
    binding = sum(np.any(np.abs(np.abs(s.p_from) - n.rate) < 1e-7) for s, n in zip(sols, nets))
    ok = all(s.ok for s in sols) and worst <= 1e-6 and elapsed < 1.0
    verdict(1, ok, f"10 nets, max rel gap {worst:.2e}, {binding}/10 with a binding flow limit, {elapsed:.3f}s")


def test_criterion_02_ac_residual(verdict):
    cases = certified_networks(10, [5, 8, 10, 12, 15, 18, 20, 24, 27, 30])
    t0 = time.perf_counter()
    sols = [solve_ac_opf(net, warm_start=solve_dc_opf(net)) for _n, _s, net in cases]
    elapsed = time.perf_counter() - t0
    res = [ac_bus_residual(net, sol) for (_n, _s, net), sol in zip(cases, sols)]
    ok = all(s.status == "locally_solved" for s in sols) and max(res) <= 1e-4 and elapsed < 60
    verdict(2, ok, f"sizes {[n for n, _s, _ in cases]}, max recomputed residual {max(res):.2e}, {elapsed:.1f}s")


def test_criterion_03_premium(verdict):
    (_n, seed, net), = certified_networks(1, [30], r_over_x=0.1)
    dc = solve_dc_opf(net)
    ac = solve_ac_opf(net, warm_start=dc)
    premium = ac.objective / dc.objective - 1
    verdict(3, ac.ok and 0 <= premium <= 0.06, f"30-bus seed {seed}, AC/DC premium {100 * premium:.2f}%")


def _rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def test_criterion_04_jacobian(verdict):
    h = 1e-6
    worst = 0.0
    for seed in range(5):
        net = random_pu_network(6 + seed, seed=seed)
        rng = np.random.default_rng(seed)
        vm, va = rng.uniform(0.9, 1.1, net.n_bus), rng.uniform(-0.3, 0.3, net.n_bus)
        Ybus, Yf, _Yt, Cf, _Ct = make_ybus(net)

        def sbus(a, m):
            V = m * np.exp(1j * a)
            return V * np.conj(Ybus @ V)

        def sf(a, m):
            V = m * np.exp(1j * a)
            return (Cf @ V) * np.conj(Yf @ V)

        V = vm * np.exp(1j * va)
        analytic = [*dSbus_dV(Ybus, V), *dSbr_dV(Yf, Cf, V)[:2]]
        funcs = [(sbus, 0), (sbus, 1), (sf, 0), (sf, 1)]
        for J, (fun, which) in zip(analytic, funcs):
            cols = []
            for k in range(net.n_bus):
                e = np.zeros(net.n_bus)
                e[k] = h
                if which == 0:
                    cols.append((fun(va + e, vm) - fun(va - e, vm)) / (2 * h))
                else:
                    cols.append((fun(va, vm + e) - fun(va, vm - e)) / (2 * h))
            worst = max(worst, _rel_err(J.toarray(), np.array(cols).T))
    verdict(4, worst <= 1e-6, f"5 nets, max relative Jacobian error {worst:.2e} (h=1e-6)")


def test_criterion_05_ladder(verdict):
    fixtures = {
        "L0": two_bus_network(rate_pu=2.0, r=0.01),
        "L2": two_bus_network(rate_pu=0.9, r=0.01),
        "L4": two_bus_network(r=0.01, cap_mw=80.0),
    }
    got, l4 = {}, None
    for want, net in fixtures.items():
        dc, ac, rep = progressive_solve(net)
        got[want] = (rep.dc_level, rep.ac_level)
        if want == "L4":
            l4 = (ac.served_mw / (net.pmax.sum() * net.base_mva), ac.loss_pct)
    levels_ok = all(v == (k, k) for k, v in got.items())
    ok = levels_ok and abs(l4[0] - 0.7) < 1e-5 and l4[1] < 0
    verdict(5, ok, f"levels {got}; L4 served {100 * l4[0]:.2f}% of capacity, loss {l4[1]:.1f}%")


def test_criterion_06_parameters(verdict):
    x = line_parameters(SimpleNamespace(voltage_kv=345, length_km=100, is_underground=False))[1]
    f = auto_transformer_factor(345, 230)
    econ = generator_costs(Generator(1, 1, 100.0, fuel_raw="gas_turbine"))
    q = generator_limits(econ, 100.0)[2] / 100.0
    checks = [(x, 0.031086), (f, 0.33333), (q, 0.6197)]
    worst = max(abs(a - b) / b for a, b in checks)
    verdict(6, worst <= 1e-4, f"x={x:.6f}, auto={f:.5f}, Qmax/Pmax={q:.4f}, max rel dev {worst:.1e}")


def test_criterion_07_merit(verdict):
    rng = np.random.default_rng(7)
    worst, violations = 0.0, 0
    for _ in range(50):
        k = int(rng.integers(2, 12))
        gens = [Generator(i + 1, 1, float(rng.uniform(10, 500)), c1=float(rng.choice([0, 12, 26, 35, 50, 70])))
                for i in range(k)]
        load = float(rng.uniform(0.05, 0.95)) * sum(g.p_max_mw for g in gens) / 1.03
        plan = merit_order_dispatch(gens, load)
        worst = max(worst, abs(sum(plan.p_set_mw.values()) / (1.03 * load) - 1))
        for g in gens:
            for o in gens:
                if plan.committed[g.id] and not plan.committed[o.id] and plan.derated_p_max[o.id] > 0:
                    violations += g.c1 > o.c1
    verdict(7, worst <= 1e-6 and violations == 0, f"50 fixtures, max rel balance error {worst:.1e}, "
                                                   f"{violations} merit violations")


def test_criterion_08_topology(verdict):
    bad = {seed: v for seed in range(100) if (v := topology_violations(seed))}
    verdict(8, not bad, f"100 random collections, {len(bad)} with violations {dict(list(bad.items())[:3])}")


def test_criterion_09_determinism(verdict, tri_state_inputs, tmp_path):
    root, paths = tri_state_inputs
    names = ("model.json", "topology.geojson", "report.json", "solution_dc.json", "solution_ac.json")
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        run_pipeline(RunConfig(inputs=paths, fixture_dir=str(Path(root) / "fixtures"), out_dir=str(out),
                               date="2024-07-15", states=["AA", "BB", "CC"]))
        runs.append({n: (out / n).read_bytes() for n in names})
    same = [n for n in names if runs[0][n] == runs[1][n]]
    verdict(9, len(same) == len(names), f"{len(same)}/{len(names)} artifacts byte-identical")


TABLE6 = {69: (3.0, 1.5), 115: (2.25, 1.0), 138: (1.75, 1.0), 161: (1.5, 1.0),
          230: (1.0, 1.0), 345: (1.0, 1.0), 525: (1.25, 1.0), 765: (1.0, 2.0)}


def test_criterion_10_scaling_identity(verdict):
    table = {"multi_state": {"t_mult": Fraction(3), "c_mult": Fraction(2)},
             "classes": {str(k): {"n_t": Fraction(str(t)), "n_c": Fraction(str(c))} for k, (t, c) in TABLE6.items()}}
    rng = np.random.default_rng(10)
    exact, float_ulps = 0, 0.0
    total = 0
    for kv in TABLE6:
        for multi in (False, True):
            for _ in range(20):
                x = Fraction(int(rng.integers(1, 10**6)), 10**6)
                mva = Fraction(int(rng.integers(1, 5000)))
                br = Branch(1, 1, 2, "ac_line", kv, r_pu=x / 10, x_pu=x, b_pu=x, rate_mva=mva)
                out = apply_scaling_factors(br, table, multi)
                n_c = scaling_factors(kv, multi, table)[1]
                exact += out.x_pu * out.rate_mva / n_c == x * mva
                total += 1
                fb = apply_scaling_factors(Branch(1, 1, 2, "ac_line", kv, x_pu=float(x), rate_mva=float(mva)),
                                           multi_state=multi)
                fl = fb.x_pu * fb.rate_mva / scaling_factors(kv, multi)[1]
                float_ulps = max(float_ulps, abs(fl - float(x) * float(mva)) / math.ulp(float(x) * float(mva)))
    verdict(10, exact == total, f"{exact}/{total} exact in rational arithmetic over 8 classes x 2 modes; "
                                f"float path within {float_ulps:.0f} ulp")
