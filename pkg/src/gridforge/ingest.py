"""Parsing of power-infrastructure GeoJSON and the statistical fixture tables."""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from shapely.geometry import Point, Polygon, shape

from ._data import hvdc_project_names

log = logging.getLogger(__name__)

LINE_TYPES = ("line", "minor_line", "cable")
FACILITY_TYPES = ("substation", "plant", "converter")
DEFAULT_GAS_PRICE = 3.50


class GeoJSONError(ValueError):
    """Malformed input; ``offset`` is the byte position of the failure."""

    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class FixtureSchemaError(ValueError):
    pass


class FixtureValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# domain records


@dataclass(frozen=True)
class RawFeature:
    osm_id: str
    geometry: object  # shapely geometry
    tags: dict


@dataclass(frozen=True)
class LineSection:
    id: str
    path: tuple  # ((lon, lat), ...)
    voltages_kv: tuple = ()
    cables: int | None = None
    circuits_declared: int | None = None
    is_hvdc: bool = False
    is_underground: bool = False
    name: str | None = None
    voltage_source: str | None = None  # "tag", "inferred" or None

    def __post_init__(self):
        if len(self.path) < 2:
            raise ValueError(f"line section {self.id} needs at least 2 vertices")
        if any(v <= 0 for v in self.voltages_kv):
            raise ValueError(f"line section {self.id} has non-positive voltage")

    @property
    def endpoints(self):
        return self.path[0], self.path[-1]

    @property
    def max_voltage(self):
        return max(self.voltages_kv) if self.voltages_kv else None


@dataclass(frozen=True)
class Facility:
    id: str
    kind: str  # substation | plant | converter
    geometry: object  # shapely Point or Polygon
    voltages_kv: tuple = ()
    plant_output_mw: float | None = None
    plant_source: str | None = None
    name: str | None = None

    @property
    def is_point(self):
        return self.geometry.geom_type == "Point"

    @property
    def centroid(self):
        c = self.geometry.centroid
        return (c.x, c.y)


@dataclass(frozen=True)
class PlantPoint:
    id: str
    coord: tuple
    output_mw: float | None = None
    source: str | None = None
    name: str | None = None


@dataclass
class ParsedFeatures:
    line_sections: list = field(default_factory=list)
    facilities: list = field(default_factory=list)
    plant_points: list = field(default_factory=list)
    discarded: list = field(default_factory=list)  # (osm_id, reason)
    diagnostics: Counter = field(default_factory=Counter)
    n_input: int = 0

    def counts(self):
        return {
            "input": self.n_input,
            "line_features": len({s.id.split("/")[0] for s in self.line_sections}),
            "line_sections": len(self.line_sections),
            "facilities": len(self.facilities),
            "plant_points": len(self.plant_points),
            "discarded": len(self.discarded),
        }

    @property
    def converters(self):
        return [f for f in self.facilities if f.kind == "converter"]

    def plants(self):
        """All plant locations: point plants plus centroids of plant polygons."""
        out = list(self.plant_points)
        for f in self.facilities:
            if f.kind == "plant":
                out.append(PlantPoint(f.id, f.centroid, f.plant_output_mw, f.plant_source, f.name))
        return sorted(out, key=lambda p: p.id)


# ---------------------------------------------------------------------------
# tag parsing


class VoltageList(list):
    """List of kV values that remembers whether the tag carried a +/- prefix."""

    hvdc_hint = False


_PM_PREFIX = re.compile(r"^\s*(±|\+/-|\+-|\+−)")


def parse_voltage_tag(raw):
    """Parse an OSM ``voltage`` tag into kV values, highest first.

    Tokens are semicolon separated and given in volts.  Tokens that do not
    parse are dropped; an empty result means the feature is untagged.
    A bipolar prefix ("±500000") sets ``hvdc_hint`` on the result.

    >>> parse_voltage_tag("345000;138000")
    [345.0, 138.0]
    """
    out = VoltageList()
    if not raw:
        return out
    for token in str(raw).split(";"):
        token = token.strip()
        if not token:
            continue
        if _PM_PREFIX.match(token):
            out.hvdc_hint = True
            token = _PM_PREFIX.sub("", token)
        token = token.replace(",", "").replace("_", "").strip()
        try:
            volts = float(token)
        except ValueError:
            continue
        if not math.isfinite(volts) or volts <= 0:
            continue
        out.append(volts / 1000.0)
    out.sort(reverse=True)
    return out


def render_voltage_tag(kv_values):
    return ";".join(repr(round(v * 1000.0, 6)).rstrip("0").rstrip(".") for v in kv_values)


def count_voltage_tokens(raw):
    if not raw:
        return 0
    return sum(1 for t in str(raw).split(";") if t.strip())


def _parse_int(raw):
    if raw is None:
        return None
    try:
        value = int(float(str(raw).split(";")[0].strip()))
    except ValueError:
        return None
    return value if value > 0 else None


_CAPACITY = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*([a-zA-Z]*)\s*$")
_CAPACITY_UNITS = {"": 1.0, "mw": 1.0, "kw": 1e-3, "gw": 1e3, "w": 1e-6, "mwp": 1.0, "kwp": 1e-3}


def parse_capacity_mw(raw):
    """Normalise a plant output tag to MW.  Bare numbers are taken as MW."""
    if raw is None:
        return None
    m = _CAPACITY.match(str(raw).replace(",", ""))
    if not m:
        return None
    unit = m.group(2).lower()
    if unit not in _CAPACITY_UNITS:
        return None
    return float(m.group(1)) * _CAPACITY_UNITS[unit]


def _is_ac_frequency(tags):
    freq = str(tags.get("frequency", "")).strip().lower()
    if not freq:
        return False
    try:
        return float(freq) > 0
    except ValueError:
        return False


def hvdc_signals(tags, project_names=None):
    """Evaluate the five independent HVDC tag signals."""
    names = hvdc_project_names() if project_names is None else project_names
    freq = str(tags.get("frequency", "")).strip().lower()
    freq_dc = freq in ("0", "0.0", "dc")
    voltages = parse_voltage_tag(tags.get("voltage", ""))
    type_dc = any(str(tags.get(k, "")).strip().lower() == "dc" for k in ("line:type", "cable:type"))
    cables = _parse_int(tags.get("cables"))
    few_conductors = (
        cables in (1, 2)
        and bool(voltages)
        and max(voltages) > 100.0
        and not _is_ac_frequency(tags)
    )
    name = str(tags.get("name", "")).lower()
    named = bool(name) and any(n in name for n in names)
    return {
        "frequency": freq_dc,
        "pm_prefix": voltages.hvdc_hint,
        "type_dc": type_dc,
        "conductors": few_conductors,
        "name": named,
    }


def detect_hvdc_tags(tags, project_names=None):
    """True if any HVDC signal fires (OR logic)."""
    return any(hvdc_signals(tags, project_names).values())


def hvdc_tag_conflict(tags):
    """An explicit AC frequency alongside a DC type/frequency signal."""
    sig = hvdc_signals(tags)
    return _is_ac_frequency(tags) and (sig["type_dc"] or sig["pm_prefix"])


# ---------------------------------------------------------------------------
# GeoJSON


def _feature_id(feature, index):
    props = feature.get("properties") or {}
    for key in ("osm_id", "@id", "id"):
        if props.get(key) not in (None, ""):
            return str(props[key])
    if feature.get("id") not in (None, ""):
        return str(feature["id"])
    return None


def _tags(feature):
    props = dict(feature.get("properties") or {})
    nested = props.pop("tags", None)
    if isinstance(nested, dict):
        props.update(nested)
    return {str(k): ("" if v is None else str(v)) for k, v in props.items()}


def _line_paths(geom):
    kind = geom.get("type")
    coords = geom.get("coordinates")
    if kind == "LineString":
        return [coords]
    if kind == "MultiLineString":
        return list(coords)
    return None


def _facility_geometry(geom):
    kind = geom.get("type")
    if kind == "Point":
        return Point(geom["coordinates"][:2])
    if kind in ("Polygon", "MultiPolygon"):
        poly = shape(geom)
        if not poly.is_valid:
            poly = poly.buffer(0)
        if poly.is_empty or poly.area <= 0:
            return None
        return poly
    if kind == "LineString":
        coords = geom.get("coordinates") or []
        if len(coords) >= 4 and tuple(coords[0]) == tuple(coords[-1]):
            return Polygon(coords)
    return None


def _load_json(data):
    if isinstance(data, (bytes, bytearray)):
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise GeoJSONError("input is not UTF-8", exc.start) from exc
    else:
        text = data
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise GeoJSONError(f"malformed JSON: {exc.msg}", offset) from exc


def iter_features(data):
    doc = data if isinstance(data, dict) else _load_json(data)
    if doc.get("type") != "FeatureCollection" or not isinstance(doc.get("features"), list):
        raise GeoJSONError("not a GeoJSON FeatureCollection")
    return doc["features"]


def parse_feature_collection(data):
    """Split a FeatureCollection by ``power`` type into domain records.

    ``data`` may be bytes, text or an already decoded dict.  Every input
    feature ends up in exactly one of line_sections (by feature), facilities,
    plant_points or discarded.
    """
    features = iter_features(data)
    out = ParsedFeatures(n_input=len(features))
    diag = out.diagnostics
    seen_line_features = set()

    for index, feat in enumerate(features):
        osm_id = _feature_id(feat, index)
        if not osm_id:
            out.discarded.append((f"#{index}", "missing_id"))
            diag["missing_id"] += 1
            continue
        geom = feat.get("geometry")
        if not geom or not geom.get("coordinates"):
            out.discarded.append((osm_id, "missing_geometry"))
            diag["missing_geometry"] += 1
            continue
        tags = _tags(feat)
        power = tags.get("power", "").strip().lower()

        if power in LINE_TYPES:
            paths = _line_paths(geom)
            if paths is None:
                out.discarded.append((osm_id, "non_line_geometry"))
                diag["non_line_geometry"] += 1
                continue
            paths = [[tuple(map(float, c[:2])) for c in p] for p in paths]
            paths = [p for p in paths if len(p) >= 2]
            if not paths:
                out.discarded.append((osm_id, "degenerate_line"))
                diag["degenerate_line"] += 1
                continue
            raw_voltage = tags.get("voltage", "")
            voltages = parse_voltage_tag(raw_voltage)
            diag["dropped_voltage_tokens"] += count_voltage_tokens(raw_voltage) - len(voltages)
            is_hvdc = detect_hvdc_tags(tags)
            if hvdc_tag_conflict(tags):
                diag["hvdc_tag_conflict"] += 1
            cables = _parse_int(tags.get("cables"))
            underground = power == "cable" or tags.get("location", "").lower() in ("underground", "underwater")
            for k, path in enumerate(paths):
                sid = osm_id if len(paths) == 1 else f"{osm_id}/{k}"
                out.line_sections.append(
                    LineSection(
                        id=sid,
                        path=tuple(path),
                        voltages_kv=tuple(voltages),
                        cables=cables,
                        circuits_declared=_parse_int(tags.get("circuits")),
                        is_hvdc=is_hvdc,
                        is_underground=underground,
                        name=tags.get("name") or None,
                        voltage_source="tag" if voltages else None,
                    )
                )
            seen_line_features.add(osm_id)
            continue

        if power in FACILITY_TYPES:
            g = _facility_geometry(geom)
            if g is None:
                out.discarded.append((osm_id, "bad_facility_geometry"))
                diag["bad_facility_geometry"] += 1
                continue
            voltages = tuple(parse_voltage_tag(tags.get("voltage", "")))
            output = parse_capacity_mw(tags.get("plant:output:electricity"))
            source = tags.get("plant:source") or tags.get("generator:source") or None
            name = tags.get("name") or None
            if power == "plant" and g.geom_type == "Point":
                out.plant_points.append(PlantPoint(osm_id, (g.x, g.y), output, source, name))
            else:
                out.facilities.append(Facility(osm_id, power, g, voltages, output, source, name))
            continue

        out.discarded.append((osm_id, f"power={power or 'none'}"))
        diag["unused_power_type"] += 1

    return out


# ---------------------------------------------------------------------------
# fixtures


@dataclass
class FixtureTables:
    eia860_plants: list = field(default_factory=list)  # dicts: name, fuel_raw, capacity_mw, lat, lon
    eia923_heatrates: dict = field(default_factory=dict)  # normalised plant name -> BTU/kWh
    ba_demand_hourly: dict = field(default_factory=dict)  # ba -> {(date|None, hour): MW}
    ba_peaks: dict = field(default_factory=dict)
    state_peaks: dict = field(default_factory=dict)
    ba_polygons: dict = field(default_factory=dict)  # ba -> shapely geometry
    ba_states: dict = field(default_factory=dict)  # ba -> tuple of state codes
    census_tracts: list = field(default_factory=list)  # dicts: polygon, population
    gas_price_usd_per_mmbtu: float = DEFAULT_GAS_PRICE
    ba_parent_map: dict = field(default_factory=dict)
    eia_circuit_km: dict = field(default_factory=dict)  # kV class -> circuit km

    def resolve_ba(self, code):
        seen = set()
        while code in self.ba_parent_map and code not in seen:
            seen.add(code)
            code = self.ba_parent_map[code]
        return code

    def demand_mw(self, ba, hour, date=None):
        series = self.ba_demand_hourly.get(self.resolve_ba(ba))
        if series is None:
            series = self.ba_demand_hourly.get(ba)
        if series is None:
            raise KeyError(f"no demand data for balancing authority {ba}")
        if (date, hour) in series:
            return series[(date, hour)]
        if (None, hour) in series:
            return series[(None, hour)]
        same_hour = sorted(k for k in series if k[1] == hour and k[0] is not None)
        if same_hour:
            return series[same_hour[0]]
        raise KeyError(f"no demand for {ba} at hour {hour}")

    def peak_mw(self, ba):
        code = self.resolve_ba(ba)
        if code in self.ba_peaks:
            return self.ba_peaks[code]
        return self.ba_peaks[ba]

    def heat_rate(self, plant_name):
        return self.eia923_heatrates.get(normalize_name(plant_name))


class FixtureProvider(Protocol):
    def load(self) -> FixtureTables: ...


def normalize_name(name):
    return re.sub(r"[^a-z0-9]+", " ", str(name or "").lower()).strip()


def _read_csv(path, required):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        for col in required:
            if col not in header:
                raise FixtureSchemaError(f"{Path(path).name}: missing required column '{col}'")
        rows = []
        for row in reader:
            rows.append({(k or "").strip(): (v or "").strip() for k, v in row.items()})
        return rows


def _parse_hour(raw):
    raw = raw.strip()
    if re.fullmatch(r"\d{1,2}", raw):
        return None, int(raw)
    m = re.match(r"(\d{4}-\d{2}-\d{2})[T ](\d{2})", raw)
    if not m:
        raise FixtureSchemaError(f"unrecognised hour_utc value '{raw}'")
    return m.group(1), int(m.group(2))


def _read_geojson(path):
    with open(path, "rb") as fh:
        return iter_features(fh.read())


def load_fixture_tables(fixture_dir):
    """Load and cross-check the fixture tables found in ``fixture_dir``."""
    d = Path(fixture_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"fixture directory not found: {d}")
    ft = FixtureTables()

    if (d / "eia860.csv").exists():
        for row in _read_csv(d / "eia860.csv", ("name", "fuel", "capacity_mw", "lat", "lon")):
            ft.eia860_plants.append(
                {
                    "name": row["name"],
                    "fuel_raw": row["fuel"],
                    "capacity_mw": float(row["capacity_mw"]),
                    "lat": float(row["lat"]),
                    "lon": float(row["lon"]),
                }
            )
    if (d / "eia923.csv").exists():
        for row in _read_csv(d / "eia923.csv", ("plant_name", "heat_rate_btu_per_kwh")):
            ft.eia923_heatrates[normalize_name(row["plant_name"])] = float(row["heat_rate_btu_per_kwh"])

    if (d / "ba_parent.csv").exists():
        for row in _read_csv(d / "ba_parent.csv", ("code", "parent")):
            ft.ba_parent_map[row["code"]] = row["parent"]

    demand = {}
    for row in _read_csv(d / "ba_demand.csv", ("ba", "hour_utc", "mw")):
        mw = float(row["mw"])
        if mw < 0:
            raise FixtureValidationError(f"negative demand for {row['ba']}")
        key = _parse_hour(row["hour_utc"])
        demand.setdefault(row["ba"], {})[key] = mw
    # a parent without its own series is reached through its sub-BAs
    published = set(demand)
    for code in sorted(published):
        parent = ft.resolve_ba(code)
        if parent != code and parent not in published:
            target = demand.setdefault(parent, {})
            for key, mw in demand[code].items():
                target[key] = target.get(key, 0.0) + mw
    ft.ba_demand_hourly = {k: demand[k] for k in sorted(demand)}

    if (d / "ba_peaks.csv").exists():
        for row in _read_csv(d / "ba_peaks.csv", ("ba", "peak_mw")):
            ft.ba_peaks[row["ba"]] = float(row["peak_mw"])
    for ba, series in ft.ba_demand_hourly.items():
        ft.ba_peaks.setdefault(ba, max(series.values()) if series else 0.0)

    for row in _read_csv(d / "state_peaks.csv", ("state", "peak_mw")):
        ft.state_peaks[row["state"]] = float(row["peak_mw"])

    for feat in _read_geojson(d / "ba_polygons.geojson"):
        props = feat.get("properties") or {}
        code = props.get("ba") or props.get("code")
        if not code:
            raise FixtureSchemaError("ba_polygons.geojson: feature without 'ba' property")
        ft.ba_polygons[code] = shape(feat["geometry"])
        states = props.get("states")
        if states:
            ft.ba_states[code] = tuple(s.strip() for s in str(states).split(";") if s.strip())

    for feat in _read_geojson(d / "census_tracts.geojson"):
        props = feat.get("properties") or {}
        if "population" not in props:
            raise FixtureSchemaError("census_tracts.geojson: missing required property 'population'")
        pop = float(props["population"])
        if pop < 0:
            raise FixtureValidationError("negative tract population")
        ft.census_tracts.append({"polygon": shape(feat["geometry"]), "population": pop})

    gas = d / "gas_price.txt"
    if gas.exists():
        ft.gas_price_usd_per_mmbtu = float(gas.read_text().strip())

    if (d / "eia_circuit_miles.csv").exists():
        rows = _read_csv(d / "eia_circuit_miles.csv", ("voltage_kv",))
        for row in rows:
            if row.get("circuit_km"):
                km = float(row["circuit_km"])
            elif row.get("circuit_miles"):
                km = float(row["circuit_miles"]) * 1.609344
            else:
                raise FixtureSchemaError("eia_circuit_miles.csv: missing required column 'circuit_km'")
            ft.eia_circuit_km[float(row["voltage_kv"])] = km

    for code in ft.ba_demand_hourly:
        if code not in ft.ba_polygons and code not in ft.ba_parent_map and not any(
            ft.resolve_ba(p) == code for p in ft.ba_polygons
        ):
            raise FixtureValidationError(f"demand for BA '{code}' has no polygon or parent mapping")
    return ft


class FileFixtureProvider:
    """Reads fixture tables from a directory; stands in for live data clients."""

    def __init__(self, fixture_dir):
        self.fixture_dir = Path(fixture_dir)

    def load(self):
        return load_fixture_tables(self.fixture_dir)
