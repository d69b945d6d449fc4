import os
import shutil
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from gridforge.synthetic import random_pu_network, write_tri_state_fixture
from oracles import power_flow_certificate

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GOLDEN = Path(__file__).parent / "golden"


def certified_networks(count, sizes, r_over_x=0.1, start_seed=0):
    """First ``count`` random networks whose feasibility a power flow certifies.

    ``sizes`` is cycled; seeds increase until each size yields a network.
    """
    out = []
    seed = start_seed
    k = 0
    while len(out) < count:
        n = sizes[k % len(sizes)]
        net = random_pu_network(n, seed=seed, r_over_x=r_over_x)
        seed += 1
        if power_flow_certificate(net) is not None:
            out.append((n, seed - 1, net))
            k += 1
    return out


@pytest.fixture(scope="session")
def tri_state_inputs(tmp_path_factory):
    """The frozen golden input set copied into a scratch directory."""
    root = tmp_path_factory.mktemp("tri_state")
    src = GOLDEN / "tri_state" / "input"
    if src.is_dir():
        shutil.copytree(src, root, dirs_exist_ok=True)
        paths = [str(root / f"{c}.geojson") for c in ("AA", "BB", "CC")]
    else:
        paths = write_tri_state_fixture(root)
    return root, paths


def write_minimal_fixtures(d, ba="BA1", state="ST", demand_mw=500.0, peak_mw=None, state_peak=400.0,
                           polygon=((-90.0, 30.0), (-70.0, 30.0), (-70.0, 50.0), (-90.0, 50.0)),
                           eia_rows=(), parent_rows=(), gas_price=None, extra_demand=()):
    """A one-BA, one-tract fixture directory; returns its path."""
    import csv
    import json

    d = Path(d)
    d.mkdir(parents=True, exist_ok=True)

    def write(name, header, rows):
        with open(d / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    rows = [[ba, f"2024-07-15T{h:02d}:00", demand_mw * (0.6 if h < 8 else 1.0)] for h in range(24)]
    rows += [list(r) for r in extra_demand]
    write("ba_demand.csv", ["ba", "hour_utc", "mw"], rows)
    if peak_mw is not None:
        write("ba_peaks.csv", ["ba", "peak_mw"], [[ba, peak_mw]])
    write("state_peaks.csv", ["state", "peak_mw"], [[state, state_peak]])
    write("eia860.csv", ["name", "fuel", "capacity_mw", "lat", "lon"], list(eia_rows))
    write("eia923.csv", ["plant_name", "heat_rate_btu_per_kwh"], [])
    if parent_rows:
        write("ba_parent.csv", ["code", "parent"], list(parent_rows))
    ring = [list(p) for p in polygon] + [list(polygon[0])]
    (d / "ba_polygons.geojson").write_text(json.dumps({"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"ba": ba, "states": state},
         "geometry": {"type": "Polygon", "coordinates": [ring]}}]}))
    (d / "census_tracts.geojson").write_text(json.dumps({"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"population": 1000},
         "geometry": {"type": "Polygon", "coordinates": [ring]}}]}))
    if gas_price is not None:
        (d / "gas_price.txt").write_text(f"{gas_price}\n")
    return d


def topology_violations(seed, n_sub=None):
    """Run the topology stages on one random collection and list broken invariants."""
    import random
    from types import SimpleNamespace

    from gridforge.ingest import parse_feature_collection
    from gridforge.pipeline import build_topology
    from gridforge.synthetic import synthetic_grid
    from gridforge.topology import (
        build_endpoint_index,
        build_facility_footprints,
        classify_circuits,
        infer_voltages,
        merge_lines,
    )
    from gridforge.topology.classify import CLASSES
    from gridforge.topology.finalize import components

    rng = random.Random(seed)
    n_sub = n_sub or rng.randint(3, 12)
    parsed = parse_feature_collection(synthetic_grid(seed=seed, n_sub=n_sub))
    bad = []
    fp = build_facility_footprints(parsed.facilities)

    secs, stats = infer_voltages(parsed.line_sections, fp)
    tagged_before = {s.id for s in parsed.line_sections if s.voltages_kv}
    if not tagged_before <= {s.id for s in secs if s.voltages_kv} or stats["iterations"] > 10:
        bad.append("voltage inference not monotone")
    shuffled = list(parsed.line_sections)
    rng.shuffle(shuffled)
    if infer_voltages(shuffled, fp)[0] != secs:
        bad.append("voltage inference depends on order")

    def signature(sections):
        groups = merge_lines(sections, build_endpoint_index(sections, fp))
        return [(g.key, g.endpoints, tuple(g.section_ids)) for g in groups], groups

    ref, groups = signature(secs)
    perm = list(secs)
    rng.shuffle(perm)
    if signature(perm)[0] != ref:
        bad.append("merge depends on order")
    classify_circuits(groups, fp)
    if any(g.classification not in CLASSES for g in groups):
        bad.append("classification not a partition")

    model, _sections, _stats = build_topology(parsed, SimpleNamespace(eia860_plants=[]))
    ids = [b.id for b in model.buses]
    if len(set(components(ids, model.branches).values())) != 1:
        bad.append("model not connected")
    if not model.generators:
        bad.append("no generator")
    if sum(b.is_slack for b in model.buses) != 1:
        bad.append("slack count != 1")
    by_cluster = {}
    for b in model.buses:
        by_cluster.setdefault(b.cluster, []).append(b.base_kv)
    for kvs in by_cluster.values():
        kvs = sorted(kvs, reverse=True)
        if any(a / b <= 1.2 for a, b in zip(kvs, kvs[1:])):
            bad.append("cluster levels within 20%")
    kv = {b.id: b.base_kv for b in model.buses}
    for br in model.branches:
        if br.kind != "ac_line":
            hv, lv = max(kv[br.from_bus], kv[br.to_bus]), min(kv[br.from_bus], kv[br.to_bus])
            if not (hv - lv > 10 or hv / lv > 1.2):
                bad.append("transformer below both thresholds")
    return bad
