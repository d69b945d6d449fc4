"""Invariants checked over generated inputs."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import topology_violations
from gridforge.opf import DEFAULT_PLAN, apply_relaxation, solve_dc_opf
from gridforge.pipeline import merge_states
from gridforge.synthetic import random_pu_network, synthetic_grid

LEVELS = DEFAULT_PLAN.names
seeds = st.integers(0, 10_000)


def _box(net):
    return {
        "ang": (net.angmin, net.angmax),
        "rate": (-net.rate, net.rate),
        "v": (net.vmin, net.vmax),
        "q": (net.qmin, net.qmax),
        "p": (net.pmin, net.pmax),
    }


def _contains(outer, inner):
    return all(np.all(outer[k][0] <= inner[k][0] + 1e-12) and np.all(inner[k][1] <= outer[k][1] + 1e-12)
               for k in inner)


@given(seeds, st.integers(3, 12), st.booleans())
def test_relaxation_bounds_only_grow(seed, n, ac1):
    net = random_pu_network(n, seed=seed)
    rng = np.random.default_rng(seed)
    net.rate = rng.uniform(0.2, 60.0, net.n_branch)  # some ratings are impedance-capped
    net.qmin = np.where(rng.random(net.n_gen) < 0.3, 0.05, net.qmin)  # positive lower Q bounds
    boxes = [_box(apply_relaxation(net, lv, ac1)) for lv in LEVELS]
    for lo, hi in zip(boxes, boxes[1:]):
        assert _contains(hi, lo)
    if not ac1:
        assert _contains(_box(apply_relaxation(net, "L0", True)), boxes[0])


@given(seeds, st.integers(3, 10))
def test_random_points_stay_feasible_up_the_ladder(seed, n):
    net = random_pu_network(n, seed=seed)
    rng = np.random.default_rng(seed + 1)
    relaxed = [apply_relaxation(net, lv) for lv in LEVELS]
    for k, lvl in enumerate(relaxed[:-1]):
        for _ in range(5):
            pt = {key: rng.uniform(np.maximum(lo, -50), np.minimum(hi, 50)) for key, (lo, hi) in _box(lvl).items()}
            nxt = _box(relaxed[k + 1])
            for key, val in pt.items():
                assert np.all(val >= nxt[key][0] - 1e-12) and np.all(val <= nxt[key][1] + 1e-12)


@given(seeds, st.integers(3, 10))
def test_load_cap_containment_when_demand_fits(seed, n):
    net = random_pu_network(n, seed=seed)
    if net.pd.sum() > 0.7 * net.pmax.sum():
        net.pmax = net.pmax * net.pd.sum() / (0.7 * net.pmax.sum())
    l3 = solve_dc_opf(net, "L3")
    assert l3.ok
    assert l3.served.sum() <= apply_relaxation(net, "L4").load_cap_frac * net.pmax.sum() + 1e-9


def test_load_cap_breaks_containment_when_demand_is_large():
    """A served load feasible at L3 can exceed the L4 cap; the cap is not a relaxation."""
    net = random_pu_network(6, seed=0)
    net.pmax = net.pmax * net.pd.sum() / (0.9 * net.pmax.sum())  # demand at 90% of capacity
    l3 = solve_dc_opf(net, "L3")
    l4 = solve_dc_opf(net, "L4")
    assert l3.ok and l4.ok
    assert l3.served.sum() > 0.7 * net.pmax.sum()
    assert l4.served.sum() == pytest.approx(0.7 * net.pmax.sum(), rel=1e-6)


@given(seeds, st.integers(2, 15))
def test_dc_loss_accounting(seed, n):
    net = random_pu_network(n, seed=seed)
    sol = solve_dc_opf(net)
    assert sol.ok
    assert abs(np.sum(sol.p_from + sol.p_to)) <= 1e-8
    assert abs(np.sum(sol.pg) - np.sum(sol.served)) <= 1e-8


@settings(max_examples=30)
@given(seeds)
def test_topology_invariants(seed):
    assert topology_violations(seed) == []


@given(st.permutations([0, 1, 2]), seeds)
def test_merge_states_permutation_invariant(order, seed):
    docs = [synthetic_grid(seed=seed + k, n_sub=4, prefix=f"z{k}") for k in range(3)]
    docs[1]["features"].append(docs[0]["features"][0])  # one shared feature
    merged = merge_states([docs[i] for i in order])
    ids = sorted(f["properties"]["osm_id"] for f in merged["features"])
    assert len(ids) == len(set(ids))
    assert ids == sorted({f["properties"]["osm_id"] for d in docs for f in d["features"]})
