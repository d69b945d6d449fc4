import math

import pytest
from shapely.geometry import Point, Polygon

from gridforge.geo import snap
from gridforge.ingest import Facility, LineSection, PlantPoint
from gridforge.topology import (
    Branch,
    Bus,
    Generator,
    ModelError,
    assign_generators,
    build_endpoint_index,
    build_facility_footprints,
    build_line_branches,
    classify_circuits,
    create_buses,
    detect_hvdc_links,
    filter_transmission,
    finalize_network,
    infer_transformers,
    infer_voltages,
    merge_lines,
    resolve_circuit_counts,
    split_voltage_levels,
)
from oracles import great_circle_m, snap_reference

LAT = 38.0
DEG_PER_M_LAT = 1.0 / 111_195.0


def sec(sid, *pts, v=(), **kw):
    return LineSection(id=sid, path=tuple(pts), voltages_kv=tuple(v), voltage_source="tag" if v else None, **kw)


def box(fid, lon, lat, half=0.001, v=(), kind="substation"):
    poly = Polygon([(lon - half, lat - half), (lon + half, lat - half), (lon + half, lat + half), (lon - half, lat + half)])
    return Facility(id=fid, kind=kind, geometry=poly, voltages_kv=tuple(v))


def east(lon, metres, lat=LAT):
    return lon + metres * DEG_PER_M_LAT / math.cos(math.radians(lat))


# -- voltage inference ------------------------------------------------------


def test_unanimous_neighbours():
    a, b, c = (-80.0, LAT), (-79.99, LAT), (-79.98, LAT)
    out, stats = infer_voltages([sec("n1", (-80.01, LAT), a, v=[138]), sec("x", a, b), sec("n2", b, c, v=[138])])
    assert next(s for s in out if s.id == "x").voltages_kv == (138,)
    assert stats["inferred"] == 1 and stats["unresolved"] == 0


def test_supermajority_vote():
    a, b = (-80.0, LAT), (-79.99, LAT)
    secs = [
        sec("x", a, b),
        sec("n1", a, (-80.0, LAT + 0.01), v=[138]),
        sec("n2", a, (-80.0, LAT - 0.01), v=[115]),
        sec("n3", a, (-80.01, LAT), v=[138]),
    ]
    # all three votes sit at one endpoint and disagree, so only rule 2 applies
    out, _ = infer_voltages(secs)
    assert next(s for s in out if s.id == "x").voltages_kv == (138,)
    out, _ = infer_voltages(secs[:3])
    assert next(s for s in out if s.id == "x").voltages_kv == ()


def test_no_majority_stays_unresolved():
    a, b = (-80.0, LAT), (-79.99, LAT)
    secs = [sec("x", a, b), sec("n1", a, (-80, 38.01), v=[138]), sec("n2", b, (-79.99, 38.01), v=[230])]
    out, stats = infer_voltages(secs)
    assert stats["unresolved"] == 1


def test_substation_voltage_joins_pool():
    fac = build_facility_footprints([box("S", -80.0, LAT, v=[230])])
    out, _ = infer_voltages([sec("x", (-80.0, LAT), (-79.95, LAT))], fac)
    assert out[0].voltages_kv == (230,)


def test_inference_propagates_over_iterations():
    pts = [(-80.0 + 0.01 * i, LAT) for i in range(6)]
    secs = [sec("s0", pts[0], pts[1], v=[345])] + [sec(f"s{i}", pts[i], pts[i + 1]) for i in range(1, 5)]
    out, stats = infer_voltages(secs)
    assert all(s.voltages_kv == (345,) for s in out)
    assert stats["iterations"] == 4


def test_filter_boundary():
    kept = filter_transmission([sec("a", (0, 0), (1, 1), v=[69]), sec("b", (0, 0), (1, 1), v=[34.5]),
                                sec("c", (0, 0), (1, 1))])
    assert [s.id for s in kept] == ["a"]


def test_filter_drops_low_entries_of_lists():
    (s,) = filter_transmission([sec("a", (0, 0), (1, 1), v=[138, 34.5])])
    assert s.voltages_kv == (138,)


# -- circuit counts ---------------------------------------------------------


def test_cables_six_gives_two_circuits():
    out = resolve_circuit_counts(sec("a", (0, 0), (1, 1), v=[345], cables=6))
    assert [(c.voltage_kv, c.index) for c in out] == [(345, 0), (345, 1)]


def test_voltage_list_overrides_declared_count():
    out = resolve_circuit_counts(sec("a", (0, 0), (1, 1), v=[345, 138], circuits_declared=1))
    assert [c.voltage_kv for c in out] == [345, 138]


def test_default_single_circuit():
    assert len(resolve_circuit_counts(sec("a", (0, 0), (1, 1), v=[230]))) == 1


def test_trust_circuits_mode_truncates_highest_first():
    out = resolve_circuit_counts(sec("a", (0, 0), (1, 1), v=[138, 345, 69], circuits_declared=2), mode="trust_circuits")
    assert [c.voltage_kv for c in out] == [345, 138]


def test_cables_not_divisible_floors_with_diagnostic():
    from collections import Counter

    diag = Counter()
    out = resolve_circuit_counts(sec("a", (0, 0), (1, 1), v=[138], cables=7), diagnostics=diag)
    assert len(out) == 2 and diag["cables_not_divisible"] == 1


def test_hvdc_circuit_key_distinct():
    ac = resolve_circuit_counts(sec("a", (0, 0), (1, 1), v=[500]))[0]
    dc = resolve_circuit_counts(sec("a", (0, 0), (1, 1), v=[500], is_hvdc=True))[0]
    assert ac.key != dc.key


# -- footprints and snapping --------------------------------------------------


def test_point_outside_polygon_within_buffer():
    idx = build_facility_footprints([box("S", -80.0, LAT, half=0.001)])
    edge_lon = -80.0 + 0.001
    assert idx.query(east(edge_lon, 50), LAT) == "S"
    assert idx.query(east(edge_lon, 90), LAT) is None


def test_point_substation_radius():
    idx = build_facility_footprints([Facility("P", "substation", Point(-80.0, LAT))])
    far = east(-80.0, 200)
    assert great_circle_m(-80.0, LAT, far, LAT) == pytest.approx(200, rel=1e-3)
    assert idx.query(far, LAT) is None
    near = -80.0 + 0.9 * (0.0009 / math.cos(math.radians(LAT)))
    assert idx.query(near, LAT) == "P"


def test_inside_unbuffered_polygon():
    assert build_facility_footprints([box("S", -80.0, LAT)]).query(-80.0, LAT) == "S"


def test_overlap_prefers_nearest_then_lowest_id():
    idx = build_facility_footprints([box("B", -80.0, LAT), box("A", -80.0, LAT)])
    assert idx.query(-80.0, LAT) == "A"


@pytest.mark.parametrize("lon,lat", [(-77.1234564, 38.9999996), (-0.0000005, 0.0000005), (12.3456785, -45.0000015)])
def test_snap_matches_decimal_rounding(lon, lat):
    assert snap(lon, lat) == (snap_reference(lon), snap_reference(lat))


def test_snap_spec_example():
    assert snap(-77.1234564, 38.9999996) == (-77123456, 39000000)


def test_endpoints_5cm_apart_share_cell():
    lon2 = east(-77.0000001, 0.05, 39.0)
    assert snap(-77.0000001, 39.0) == snap(lon2, 39.0)


def test_endpoints_one_cell_apart_distinct():
    assert snap(-77.000001, 39.0) != snap(-77.000002, 39.0)


def test_endpoint_index_annotates_facility():
    fac = build_facility_footprints([box("S", -80.0, LAT)])
    idx = build_endpoint_index([sec("a", (-80.0, LAT), (-79.9, LAT), v=[138])], fac)
    assert idx.facility_at(snap(-80.0, LAT)) == "S"
    assert idx.facility_at(snap(-79.9, LAT)) is None
    assert idx[snap(-79.9, LAT)] == [("a", 1)]


# -- merge -------------------------------------------------------------------

A, B, C, D = (-80.0, LAT), (-79.99, LAT), (-79.98, LAT), (-79.97, LAT)


def _merge(sections, facilities=()):
    fac = build_facility_footprints(list(facilities))
    return merge_lines(sections, build_endpoint_index(sections, fac))


def test_chain_merges_with_outer_endpoints():
    (g,) = _merge([sec("s1", A, B, v=[138]), sec("s3", D, C, v=[138]), sec("s2", B, C, v=[138])])
    assert set(g.endpoints) == {snap(*A), snap(*D)}
    assert sorted(g.section_ids) == ["s1", "s2", "s3"]
    assert len(g.path) == 4


def test_different_voltages_not_merged():
    assert len(_merge([sec("s1", A, B, v=[138]), sec("s2", B, C, v=[345])])) == 2


def test_inherited_voltage_merges():
    secs, _ = infer_voltages([sec("s1", A, B, v=[138]), sec("s2", B, C)])
    (g,) = _merge(secs)
    assert g.voltage_kv == 138


def test_no_merge_inside_facility():
    assert len(_merge([sec("s1", A, B, v=[138]), sec("s2", B, C, v=[138])], [box("S", *B)])) == 2


def test_merge_independent_of_order():
    secs = [sec("s1", A, B, v=[138]), sec("s2", B, C, v=[138]), sec("s3", C, D, v=[138]),
            sec("t1", (-80.0, 38.1), (-79.99, 38.1), v=[230])]
    ref = [(g.key, g.endpoints, g.section_ids) for g in _merge(secs)]
    assert ref == [(g.key, g.endpoints, g.section_ids) for g in _merge(list(reversed(secs)))]


def test_hvdc_and_ac_never_merge():
    assert len(_merge([sec("s1", A, B, v=[500]), sec("s2", B, C, v=[500], is_hvdc=True)])) == 2


# -- classification -----------------------------------------------------------


def _classify(sections, facilities):
    fac = build_facility_footprints(list(facilities))
    groups = merge_lines(sections, build_endpoint_index(sections, fac))
    return {g.section_ids[0]: g.classification for g in classify_circuits(groups, fac)}


def test_inter_facility_loop_single():
    facs = [box("S1", *A, half=0.0005), box("S2", *D, half=0.0005)]
    assert _classify([sec("a", A, D, v=[138])], facs) == {"a": "inter_facility"}
    assert _classify([sec("b", A, (A[0], LAT + 0.01), (A[0] + 0.0003, LAT), v=[138])], facs) == {"b": "loop"}
    assert _classify([sec("c", A, (A[0], LAT + 0.05), v=[138])], facs) == {"c": "single_facility"}


def test_isolated_tap_and_self_loop():
    out = _classify([
        sec("iso", (-70.0, 40.0), (-70.1, 40.0), v=[138]),
        sec("main", (-71.0, 40.0), (-71.05, 40.0), (-71.1, 40.0), v=[138]),
        sec("tap", (-71.05, 40.0), (-71.05, 40.1), v=[138]),
        sec("self", (-72.0, 40.0), (-72.0, 40.1), (-72.0, 40.0), v=[138]),
    ], [])
    assert out["iso"] == "isolated"
    assert out["tap"] == "tap"
    assert out["self"] == "self_loop"


# -- buses and transformers -----------------------------------------------------


def _records(pairs, facilities):
    secs = [sec(f"s{i}", a, b, v=[v]) for i, (a, b, v) in enumerate(pairs)]
    fac = build_facility_footprints(list(facilities))
    groups = classify_circuits(merge_lines(secs, build_endpoint_index(secs, fac)), fac)
    return groups, fac


def test_345_138_cluster_gives_two_buses_and_transformer():
    groups, fac = _records([(A, D, 345), (A, (A[0], 38.1), 138), (D, (A[0], 38.1), 138)],
                           [box("S1", *A, half=0.0005), box("S2", *D, half=0.0005), box("S3", A[0], 38.1, half=0.0005)])
    bs = create_buses(groups, fac)
    s1 = sorted(b.base_kv for b in bs.buses if b.facility_id == "S1")
    assert s1 == [138, 345]
    xf, _ = infer_transformers(bs.buses, build_line_branches(groups, bs))
    assert {x.voltage_kv for x in xf} == {(345, 138)}


def test_230_220_one_bus_no_transformer():
    assert split_voltage_levels([230, 220]) == [[230, 220]]
    buses = [Bus(1, (0, 0), 230, cluster="c"), Bus(2, (0, 0), 220, cluster="c")]
    assert infer_transformers(buses)[0] == []


def test_split_levels_keep_20pct_gap():
    groups = split_voltage_levels([500, 345, 230, 220, 138, 115, 69])
    heads = [g[0] for g in groups]
    assert all(a / b > 1.2 for a, b in zip(heads, heads[1:]))


def test_adhoc_clustering_within_50m():
    p = (-75.0, 40.0)
    q = (east(p[0], 30, 40.0), 40.0)
    groups, fac = _records([(p, (-75.0, 40.1), 138), (q, (-75.1, 40.0), 138)], [])
    bs = create_buses(groups, fac)
    assert bs.endpoint_bus[(groups[0].key, 0)] == bs.endpoint_bus[(groups[1].key, 0)]


def test_catchall_converts_138_115_line():
    buses = [Bus(1, (0, 0), 138, cluster="a"), Bus(2, (1, 0), 115, cluster="b")]
    line = Branch(7, 2, 1, "ac_line", 138, length_km=10.0)
    xf, updated = infer_transformers(buses, [line])
    assert xf == []
    assert updated[0].kind == "transformer"
    assert (updated[0].from_bus, updated[0].to_bus) == (1, 2)


# -- generators ---------------------------------------------------------------

BUSES = [Bus(1, (-80.0, LAT), 138), Bus(2, (-79.0, LAT), 138)]


def test_plant_300m_assigned_2km_dropped():
    near = PlantPoint("p1", (east(-80.0, 300), LAT), 100.0, "gas")
    far = PlantPoint("p2", (east(-80.0, 2000), LAT), 100.0, "gas")
    assert great_circle_m(-80.0, LAT, *far.coord) > 1000
    gens, _ = assign_generators([near, far], BUSES)
    assert [(g.osm_id, g.bus) for g in gens] == [("p1", 1)]
    assert gens[0].p_set_mw == 50.0


def test_eia_capacity_override():
    plant = PlantPoint("p1", (east(-80.0, 300), LAT), 400.0, "gas", name="Riverside Energy Center")
    eia = [{"name": "Riverside", "fuel_raw": "NG", "capacity_mw": 450.0, "lon": -80.001, "lat": LAT}]
    gens, used = assign_generators([plant], BUSES, eia)
    assert gens[0].p_max_mw == 450.0 and gens[0].eia_matched and used == {0}


def test_eia_fuel_mismatch_rejected():
    plant = PlantPoint("p1", (-80.0, LAT), 400.0, "coal", name="Riverside")
    eia = [{"name": "Riverside", "fuel_raw": "solar", "capacity_mw": 450.0, "lon": -80.0, "lat": LAT}]
    gens, _ = assign_generators([plant], BUSES, eia)
    assert gens[0].p_max_mw == 400.0


# -- HVDC -------------------------------------------------------------------------


def _dc_circuits(ends, hvdc):
    secs = [sec("d", *ends, v=[500], is_hvdc=hvdc)]
    return merge_lines(secs, build_endpoint_index(secs))


def test_flagged_circuit_becomes_link():
    links, promoted = detect_hvdc_links(_dc_circuits([(-80.0, LAT), (-79.0, LAT)], True), [], BUSES)
    assert len(links) == 1 and promoted == []
    assert links[0].p_max_mw > 0


def test_converter_post_pass():
    conv = [Facility("c1", "converter", Point(east(-80.0, 300), LAT)), Facility("c2", "converter", Point(east(-79.0, 300), LAT))]
    links, promoted = detect_hvdc_links(_dc_circuits([(-80.0, LAT), (-79.0, LAT)], False), conv, BUSES)
    assert len(links) == 1 and len(promoted) == 1
    links, promoted = detect_hvdc_links(_dc_circuits([(-80.0, LAT), (-79.0, LAT)], False), conv[:1], BUSES)
    assert links == [] and promoted == []


# -- finalize ---------------------------------------------------------------------


def _gen(gid, bus, pmax):
    return Generator(id=gid, bus=bus, p_max_mw=pmax)


def test_generator_free_component_removed():
    buses = [Bus(i, (i, 0), 138, cluster=f"c{i}") for i in range(1, 5)]
    branches = [Branch(1, 1, 2, "ac_line", 138), Branch(2, 3, 4, "ac_line", 138)]
    model, stats = finalize_network(buses, branches, [_gen(1, 1, 100)])
    assert [b.id for b in model.buses] == [1, 2]
    assert stats["generator_free_removed"] == 2


def test_isolated_bus_removed_and_slack_argmax():
    buses = [Bus(i, (i, 0), 138, cluster=f"c{i}") for i in range(1, 5)]
    branches = [Branch(1, 1, 2, "ac_line", 138), Branch(2, 2, 3, "ac_line", 138)]
    model, stats = finalize_network(buses, branches, [_gen(1, 1, 100), _gen(2, 3, 980)])
    assert stats["isolated_removed"] == 1
    assert model.slack_bus.id == 3
    assert sum(b.is_slack for b in model.buses) == 1


def test_bridges_two_units_at_ehv():
    buses = [Bus(1, (0, 0), 345, cluster="S"), Bus(2, (0, 0), 138, cluster="S"), Bus(3, (1, 0), 138, cluster="T")]
    model, stats = finalize_network(buses, [Branch(1, 2, 3, "ac_line", 138)], [_gen(1, 1, 100)])
    assert stats["bridges_added"] == 2
    assert len(model.buses) == 3


def test_no_generators_is_fatal():
    with pytest.raises(ModelError):
        finalize_network([Bus(1, (0, 0), 138), Bus(2, (1, 0), 138)], [Branch(1, 1, 2, "ac_line", 138)], [])
