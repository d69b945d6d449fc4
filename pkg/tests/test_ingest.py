import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import write_minimal_fixtures
from gridforge.ingest import (
    FixtureSchemaError,
    FixtureValidationError,
    GeoJSONError,
    detect_hvdc_tags,
    hvdc_signals,
    load_fixture_tables,
    parse_capacity_mw,
    parse_feature_collection,
    parse_voltage_tag,
    render_voltage_tag,
)


def fc(*features):
    return {"type": "FeatureCollection", "features": list(features)}


def feat(fid, tags, geometry):
    return {"type": "Feature", "properties": dict(osm_id=fid, **tags), "geometry": geometry}


LINE = {"type": "LineString", "coordinates": [[-80.0, 38.0], [-79.9, 38.1]]}
SQUARE = {"type": "Polygon", "coordinates": [[[-80, 38], [-79.99, 38], [-79.99, 38.01], [-80, 38.01], [-80, 38]]]}


# -- parse_feature_collection ----------------------------------------------


def test_single_line_feature():
    out = parse_feature_collection(fc(feat("w1", {"power": "line", "voltage": "138000"}, LINE)))
    assert len(out.line_sections) == 1
    assert list(out.line_sections[0].voltages_kv) == [138.0]


def test_line_with_polygon_geometry_is_excluded():
    out = parse_feature_collection(fc(feat("w1", {"power": "line", "voltage": "138000"}, SQUARE)))
    assert out.line_sections == []
    assert out.discarded == [("w1", "non_line_geometry")]


def test_multi_voltage_substation():
    out = parse_feature_collection(fc(feat("s1", {"power": "substation", "voltage": "345000;138000"}, SQUARE)))
    (fac,) = out.facilities
    assert fac.kind == "substation"
    assert list(fac.voltages_kv) == [345.0, 138.0]


def test_malformed_json_reports_byte_offset():
    raw = b'{"type": "FeatureCollection", "features": [,]}'
    with pytest.raises(GeoJSONError) as err:
        parse_feature_collection(raw)
    assert err.value.offset == raw.index(b",]")


def test_missing_geometry_is_counted():
    out = parse_feature_collection(fc(
        {"type": "Feature", "properties": {"osm_id": "w9", "power": "line"}, "geometry": None},
        feat("w1", {"power": "line", "voltage": "230000"}, LINE),
    ))
    assert len(out.line_sections) == 1
    assert out.diagnostics["missing_geometry"] == 1


def test_plant_capacity_normalised_to_mw():
    assert parse_capacity_mw("450 MW") == 450.0
    assert parse_capacity_mw("12500 kW") == 12.5
    assert parse_capacity_mw("300") == 300.0
    assert parse_capacity_mw("lots") is None


feature_kinds = st.sampled_from(["line", "line_polygon", "substation", "plant_point", "plant_area", "tower",
                                 "no_geometry", "multiline"])


def _make(kind, i):
    fid = f"f{i}"
    if kind == "line":
        return feat(fid, {"power": "line", "voltage": "138000"}, LINE)
    if kind == "line_polygon":
        return feat(fid, {"power": "line"}, SQUARE)
    if kind == "substation":
        return feat(fid, {"power": "substation"}, SQUARE)
    if kind == "plant_point":
        return feat(fid, {"power": "plant"}, {"type": "Point", "coordinates": [-80, 38]})
    if kind == "plant_area":
        return feat(fid, {"power": "plant"}, SQUARE)
    if kind == "tower":
        return feat(fid, {"power": "tower"}, {"type": "Point", "coordinates": [-80, 38]})
    if kind == "multiline":
        return feat(fid, {"power": "cable", "voltage": "230000"},
                    {"type": "MultiLineString", "coordinates": [LINE["coordinates"], LINE["coordinates"]]})
    return {"type": "Feature", "properties": {"osm_id": fid, "power": "line"}, "geometry": None}


@given(st.lists(feature_kinds, max_size=25))
def test_partition_completeness(kinds):
    out = parse_feature_collection(fc(*[_make(k, i) for i, k in enumerate(kinds)]))
    c = out.counts()
    assert c["line_features"] + c["facilities"] + c["plant_points"] + c["discarded"] == c["input"] == len(kinds)
    ids = ({s.id.split("/")[0] for s in out.line_sections} | {f.id for f in out.facilities}
           | {p.id for p in out.plant_points} | {d[0] for d in out.discarded})
    assert len(ids) == len(kinds)


# -- parse_voltage_tag --------------------------------------------------------


def test_voltage_tag_examples():
    assert parse_voltage_tag("345000;138000") == [345.0, 138.0]
    assert parse_voltage_tag("") == []
    v = parse_voltage_tag("±500000")
    assert v == [500.0] and v.hvdc_hint


def test_unparseable_tokens_dropped_and_sorted():
    assert parse_voltage_tag("115000;junk;230000") == [230.0, 115.0]
    assert parse_voltage_tag("n/a") == []


@given(st.lists(st.integers(min_value=1, max_value=1_200_000), max_size=4))
def test_voltage_parse_idempotent_on_render(volts):
    once = parse_voltage_tag(";".join(map(str, volts)))
    twice = parse_voltage_tag(render_voltage_tag(once))
    assert twice == once


# -- detect_hvdc_tags ---------------------------------------------------------


def test_hvdc_examples():
    assert detect_hvdc_tags({"frequency": "0"})
    assert not detect_hvdc_tags({"voltage": "345000", "cables": "3"})
    assert detect_hvdc_tags({"cables": "2", "voltage": "500000"})


def test_hvdc_curated_name():
    assert detect_hvdc_tags({"name": "Pacific Intertie", "voltage": "500000", "cables": "3"})


SIGNAL_TAGS = {
    "frequency": ({"frequency": "0"}, {"frequency": "60"}),
    "pm_prefix": ({"voltage": "±450000"}, {"voltage": "450000"}),
    "type_dc": ({"line:type": "dc"}, {}),
    "conductors": ({"cables": "2"}, {"cables": "3"}),
    "name": ({"name": "Cross-Sound Cable"}, {"name": "Ordinary Line"}),
}


@pytest.mark.parametrize("mask", list(itertools.product([False, True], repeat=5)))
def test_hvdc_signal_lattice(mask):
    """Every combination of the five signals: detection equals their OR."""
    tags = {"voltage": "450000"}
    for on, (name, (yes, no)) in zip(mask, SIGNAL_TAGS.items()):
        chosen = dict(yes if on else no)
        if name == "pm_prefix" and not on and mask[0]:
            pass
        if name == "conductors" and on:
            chosen["cables"] = "2"
        tags.update({k: v for k, v in chosen.items() if not (k == "voltage" and tags.get("voltage", "").startswith("±"))})
    if mask[1]:
        tags["voltage"] = "±450000"
    if mask[3] and not mask[0]:
        tags.pop("frequency", None)  # an explicit AC frequency would veto the conductor signal
    sig = hvdc_signals(tags)
    assert detect_hvdc_tags(tags) == any(sig.values())
    assert sig["pm_prefix"] == mask[1]
    assert sig["type_dc"] == mask[2]
    assert sig["name"] == mask[4]
    if not any(mask):
        assert not detect_hvdc_tags(tags)


# -- load_fixture_tables ------------------------------------------------------


def test_minimal_fixture_loads(tmp_path):
    ft = load_fixture_tables(write_minimal_fixtures(tmp_path))
    assert ft.demand_mw("BA1", 16, "2024-07-15") == 500.0
    assert len(ft.census_tracts) == 1


def test_sub_ba_demand_reached_under_parent(tmp_path):
    d = write_minimal_fixtures(tmp_path, ba="DUK", parent_rows=[("CPLE", "DUK")],
                               extra_demand=[("CPLE", "2024-07-15T16:00", 120.0)])
    ft = load_fixture_tables(d)
    assert ft.resolve_ba("CPLE") == "DUK"
    assert ft.demand_mw("CPLE", 16, "2024-07-15") == ft.demand_mw("DUK", 16, "2024-07-15")


def test_gas_price_defaults_when_file_absent(tmp_path):
    assert load_fixture_tables(write_minimal_fixtures(tmp_path)).gas_price_usd_per_mmbtu == 3.50
    assert load_fixture_tables(write_minimal_fixtures(tmp_path / "g", gas_price=4.25)).gas_price_usd_per_mmbtu == 4.25


def test_missing_column_names_column(tmp_path):
    d = write_minimal_fixtures(tmp_path)
    (d / "state_peaks.csv").write_text("state,peak\nST,1\n")
    with pytest.raises(FixtureSchemaError, match="peak_mw"):
        load_fixture_tables(d)


def test_dangling_ba_code_rejected(tmp_path):
    d = write_minimal_fixtures(tmp_path, extra_demand=[("GHOST", "2024-07-15T16:00", 10.0)])
    with pytest.raises(FixtureValidationError, match="GHOST"):
        load_fixture_tables(d)


def test_negative_demand_rejected(tmp_path):
    d = write_minimal_fixtures(tmp_path, extra_demand=[("BA1", "2024-07-16T01:00", -5.0)])
    with pytest.raises(FixtureValidationError):
        load_fixture_tables(d)


def test_geojson_accepts_bytes_and_text():
    doc = fc(feat("w1", {"power": "line", "voltage": "69000"}, LINE))
    a = parse_feature_collection(json.dumps(doc).encode())
    b = parse_feature_collection(json.dumps(doc))
    assert a.line_sections == b.line_sections
