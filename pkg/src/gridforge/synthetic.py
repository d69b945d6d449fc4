"""Small synthetic networks and feature collections for tests and walkthroughs."""

from __future__ import annotations

import math

import numpy as np

from .opf.network import PQ, PV, REF, S_BASE, PuNetwork


def pu_network(n_bus, branches, gens, loads, slack=0, vmin=0.95, vmax=1.05, gen_vmax=1.10,
               dclines=(), shunts=None, base_kv=345.0):
    """Build a PuNetwork from plain tuples (per-unit values).

    branches: (f, t, r, x, b, rate_pu, angle_deg[, transformer])
    gens:     (bus, pmin, pmax, qmin, qmax, c1_usd_per_mwh[, fuel[, c2]])
    loads:    {bus: (pd, qd)}
    dclines:  (f, t, pmax, loss0, loss1, qmin, qmax)
    """
    gen_buses = {g[0] for g in gens}
    bus_type = np.array([REF if i == slack else (PV if i in gen_buses else PQ) for i in range(n_bus)])
    pd = np.zeros(n_bus)
    qd = np.zeros(n_bus)
    for i, (p, q) in loads.items():
        pd[i], qd[i] = p, q
    vlo = np.full(n_bus, vmin)
    vhi = np.array([gen_vmax if i in gen_buses else vmax for i in range(n_bus)])
    br = [tuple(b) + (False,) * (8 - len(b)) for b in branches]
    ang = np.radians([b[6] for b in br]) if br else np.zeros(0)
    dcl = list(dclines)
    return PuNetwork(
        bus_ids=np.arange(1, n_bus + 1),
        bus_type=bus_type,
        pd=pd,
        qd=qd,
        gs=np.zeros(n_bus),
        bs=np.zeros(n_bus) if shunts is None else np.asarray(shunts, float),
        vmin=vlo,
        vmax=vhi,
        base_kv=np.full(n_bus, base_kv),
        br_ids=np.arange(1, len(br) + 1),
        f=np.array([b[0] for b in br], dtype=int),
        t=np.array([b[1] for b in br], dtype=int),
        r=np.array([b[2] for b in br], dtype=float),
        x=np.array([b[3] for b in br], dtype=float),
        b=np.array([b[4] for b in br], dtype=float),
        rate=np.array([b[5] for b in br], dtype=float),
        angmin=-ang,
        angmax=ang,
        is_transformer=np.array([bool(b[7]) for b in br], dtype=bool),
        gen_ids=np.arange(1, len(gens) + 1),
        gen_bus=np.array([g[0] for g in gens], dtype=int),
        pmin=np.array([g[1] for g in gens], dtype=float),
        pmax=np.array([g[2] for g in gens], dtype=float),
        qmin=np.array([g[3] for g in gens], dtype=float),
        qmax=np.array([g[4] for g in gens], dtype=float),
        c2=np.array([g[7] if len(g) > 7 else 0.0 for g in gens], dtype=float) * S_BASE**2,
        c1=np.array([g[5] for g in gens], dtype=float) * S_BASE,
        c0=np.zeros(len(gens)),
        pg0=np.array([0.5 * g[2] for g in gens], dtype=float),
        gen_fuel=[g[6] if len(g) > 6 else "Gas" for g in gens],
        dc_ids=np.arange(1, len(dcl) + 1),
        dc_f=np.array([d[0] for d in dcl], dtype=int),
        dc_t=np.array([d[1] for d in dcl], dtype=int),
        dc_pmax=np.array([d[2] for d in dcl], dtype=float),
        dc_loss0=np.array([d[3] for d in dcl], dtype=float),
        dc_loss1=np.array([d[4] for d in dcl], dtype=float),
        dc_qmin=np.array([d[5] for d in dcl], dtype=float),
        dc_qmax=np.array([d[6] for d in dcl], dtype=float),
    )


def _random_edges(n, rng, extra):
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.add((j, i))
    tries = 0
    while len(edges) < n - 1 + extra and tries < 50 * n:
        a, b = sorted(int(v) for v in rng.choice(n, 2, replace=False))
        edges.add((a, b))
        tries += 1
    return sorted(edges)


def random_pu_network(n_bus, seed=0, r_over_x=0.1, extra_edges=None, load_pu=(0.2, 1.0), n_gen=None,
                      rate_margin=4.0, charging=0.02, lossless=False):
    """Connected random network with ample generation and loose limits.

    Every load bus carries reactive demand at PF 0.92; generators get a
    capacity margin of 1.6x total load and wide reactive ranges so that the
    AC problem is feasible at the default bounds.
    """
    rng = np.random.default_rng(seed)
    extra = max(1, n_bus // 3) if extra_edges is None else extra_edges
    edges = _random_edges(n_bus, rng, extra)
    x = rng.uniform(0.02, 0.08, len(edges))
    r = np.zeros_like(x) if lossless else r_over_x * x
    b = np.zeros_like(x) if lossless else rng.uniform(0, charging, len(edges))
    loads = {}
    for i in range(n_bus):
        if rng.random() < 0.7:
            p = float(rng.uniform(*load_pu))
            loads[i] = (p, p * math.tan(math.acos(0.92)))
    if not loads:
        loads[n_bus - 1] = (0.5, 0.5 * math.tan(math.acos(0.92)))
    total = sum(p for p, _ in loads.values())
    n_gen = n_gen or max(2, n_bus // 3)
    gen_bus = sorted(int(v) for v in rng.choice(n_bus, size=min(n_gen, n_bus), replace=False))
    caps = rng.uniform(0.5, 1.5, len(gen_bus))
    caps *= 1.6 * total / caps.sum()
    costs = rng.uniform(10.0, 60.0, len(gen_bus))
    gens = [(bus, 0.0, float(c), -float(c), float(c), float(k)) for bus, c, k in zip(gen_bus, caps, costs)]
    rate = rate_margin * total
    branches = [(a, c, float(ri), float(xi), float(bi), rate, 30.0) for (a, c), ri, xi, bi in zip(edges, r, x, b)]
    slack = gen_bus[int(np.argmax(caps))]
    return pu_network(n_bus, branches, gens, loads, slack=slack)


def two_bus_network(rate_pu=math.inf, r=0.0, x=0.1, load_mw=100.0, cap_mw=200.0, c1=10.0):
    """Generator at bus 1, load at bus 2, one line."""
    return pu_network(
        2,
        [(0, 1, r, x, 0.0, rate_pu, 30.0)],
        [(0, 0.0, cap_mw / S_BASE, -cap_mw / S_BASE, cap_mw / S_BASE, c1)],
        {1: (load_mw / S_BASE, 0.0)},
        slack=0,
    )


# ---------------------------------------------------------------------------
# feature collections and fixture directories

VOLTAGE_SETS = ((345.0, 138.0), (138.0,), (345.0,), (230.0, 115.0), (138.0, 69.0))
FUELS = ("gas", "coal", "nuclear", "solar", "wind", "hydro", "oil")


def _square(lon, lat, half):
    return [[[lon - half, lat - half], [lon + half, lat - half], [lon + half, lat + half],
             [lon - half, lat + half], [lon - half, lat - half]]]


def _feature(fid, tags, geometry):
    props = {"osm_id": fid}
    props.update(tags)
    return {"type": "Feature", "properties": props, "geometry": geometry}


def _volts(v):
    return ";".join(str(int(round(x * 1000))) for x in v)


def synthetic_grid(seed=0, n_sub=6, origin=(-80.0, 38.0), spacing=0.08, prefix="s", split_prob=0.5,
                   untagged_prob=0.15, n_plants=None, noise=True):
    """Random FeatureCollection of substations, multi-section lines and plants.

    Substations sit on a jittered grid; a spanning tree plus a few extra
    edges are drawn as lines whose voltage is shared by both ends.  Lines
    are often split into consecutive sections and some sections lose their
    voltage tag so that inference and merging are exercised.
    """
    rng = np.random.default_rng(seed)
    cols = max(2, int(math.ceil(math.sqrt(n_sub))))
    subs = []
    for i in range(n_sub):
        r, c = divmod(i, cols)
        lon = origin[0] + c * spacing + rng.uniform(-0.2, 0.2) * spacing
        lat = origin[1] + r * spacing + rng.uniform(-0.2, 0.2) * spacing
        volts = VOLTAGE_SETS[int(rng.integers(0, len(VOLTAGE_SETS)))]
        subs.append((f"{prefix}sub{i}", round(lon, 6), round(lat, 6), volts))
    feats = []
    for sid, lon, lat, volts in subs:
        feats.append(_feature(sid, {"power": "substation", "voltage": _volts(volts), "name": sid.upper()},
                              {"type": "Polygon", "coordinates": _square(lon, lat, 0.002)}))
    edges = set()
    for i in range(1, n_sub):
        edges.add((int(rng.integers(0, i)), i))
    for _ in range(max(1, n_sub // 3)):
        a, b = sorted(int(v) for v in rng.choice(n_sub, 2, replace=False))
        edges.add((a, b))
    line_no = 0
    for a, b in sorted(edges):
        va, vb = set(subs[a][3]), set(subs[b][3])
        common = sorted(va & vb, reverse=True)
        if not common:
            # give the far end the near end's top voltage so the corridor is meaningful
            common = [max(va)]
            subs[b] = subs[b][:3] + (tuple(sorted(vb | {max(va)}, reverse=True)),)
            feats = [f if f["properties"]["osm_id"] != subs[b][0] else _feature(
                subs[b][0], {"power": "substation", "voltage": _volts(subs[b][3]), "name": subs[b][0].upper()},
                f["geometry"]) for f in feats]
        v = common[0]
        (lon0, lat0), (lon1, lat1) = subs[a][1:3], subs[b][1:3]
        pieces = 1 + (int(rng.integers(1, 3)) if rng.random() < split_prob else 0)
        pts = [(lon0 + (lon1 - lon0) * k / pieces, lat0 + (lat1 - lat0) * k / pieces) for k in range(pieces + 1)]
        pts = [(round(x, 6), round(y, 6)) for x, y in pts]
        double = rng.random() < 0.2
        for k in range(pieces):
            mid = ((pts[k][0] + pts[k + 1][0]) / 2 + rng.uniform(-0.003, 0.003),
                   (pts[k][1] + pts[k + 1][1]) / 2 + rng.uniform(-0.003, 0.003))
            tags = {"power": "line", "voltage": _volts([v])}
            if k > 0 and rng.random() < untagged_prob:
                tags.pop("voltage")
            if double:
                tags["circuits"] = "2"
            coords = [list(pts[k]), [round(mid[0], 6), round(mid[1], 6)], list(pts[k + 1])]
            feats.append(_feature(f"{prefix}line{line_no}_{k}", tags, {"type": "LineString", "coordinates": coords}))
        line_no += 1
    n_plants = n_plants if n_plants is not None else max(2, n_sub // 2)
    hosts = rng.choice(n_sub, size=min(n_plants, n_sub), replace=False)
    for j, h in enumerate(sorted(int(v) for v in hosts)):
        sid, lon, lat, volts = subs[h]
        fuel = FUELS[int(rng.integers(0, len(FUELS)))]
        mw = float(rng.choice([150, 300, 600, 900]))
        feats.append(_feature(f"{prefix}plant{j}", {
            "power": "plant", "plant:source": fuel, "plant:output:electricity": f"{int(mw)} MW",
            "name": f"{prefix.upper()} Plant {j}"},
            {"type": "Point", "coordinates": [round(lon + 0.001, 6), round(lat + 0.001, 6)]}))
    if noise:
        feats.append(_feature(f"{prefix}tower0", {"power": "tower"}, {"type": "Point", "coordinates": [origin[0], origin[1]]}))
        feats.append(_feature(f"{prefix}minor0", {"power": "minor_line", "voltage": "34500"},
                              {"type": "LineString", "coordinates": [[origin[0], origin[1]],
                                                                     [origin[0] + 0.01, origin[1] + 0.01]]}))
    return {"type": "FeatureCollection", "features": feats}


TRI_STATES = (("AA", -82.0), ("BB", -81.0), ("CC", -80.0))


def _write_csv(path, header, rows):
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _dump(path, obj):
    import json

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_tri_state_fixture(root, n_sub=8):
    """Write three adjacent synthetic states plus a fixture directory.

    Layout: ``root/AA.geojson``, ``BB.geojson``, ``CC.geojson`` (a shared
    corridor line appears in both AA and BB) and ``root/fixtures``.  BA1
    serves AA and BB, BA2 serves CC; BA2X is a sub-BA reporting under BA2.
    Returns the list of state GeoJSON paths.
    """
    from pathlib import Path

    root = Path(root)
    fx = root / "fixtures"
    fx.mkdir(parents=True, exist_ok=True)
    paths = []
    plants = []
    for k, (code, lon0) in enumerate(TRI_STATES):
        fc = synthetic_grid(seed=100 + k, n_sub=n_sub, origin=(lon0 + 0.3, 38.3), spacing=0.12,
                            prefix=code.lower(), noise=(k == 0))
        for f in fc["features"]:
            p = f["properties"]
            if p.get("power") == "plant":
                plants.append((p["name"], p["plant:source"], f["geometry"]["coordinates"]))
        paths.append(root / f"{code}.geojson")
        _dump(paths[-1], fc)
    # tie lines between adjacent states (duplicated into both extracts)
    import json

    docs = [json.loads(p.read_text()) for p in paths]

    def sub_of(doc, name):
        for f in doc["features"]:
            if f["properties"]["osm_id"] == name:
                ring = f["geometry"]["coordinates"][0]
                return (ring[0][0] + ring[2][0]) / 2, (ring[0][1] + ring[2][1]) / 2, f["properties"]["voltage"]
        raise KeyError(name)

    for k in range(2):
        a_doc, b_doc = docs[k], docs[k + 1]
        a_code, b_code = TRI_STATES[k][0].lower(), TRI_STATES[k + 1][0].lower()
        (ax, ay, av), (bx, by, bv) = sub_of(a_doc, f"{a_code}sub{n_sub - 1}"), sub_of(b_doc, f"{b_code}sub0")
        shared = sorted(set(av.split(";")) & set(bv.split(";")), key=lambda s: -int(s))
        volt = shared[0] if shared else av.split(";")[0]
        if not shared:
            for f in b_doc["features"]:
                if f["properties"]["osm_id"] == f"{b_code}sub0":
                    f["properties"]["voltage"] = ";".join(sorted(set(bv.split(";")) | {volt}, key=lambda s: -int(s)))
        tie = _feature(f"tie{k}", {"power": "line", "voltage": volt, "name": f"Tie {k}"},
                       {"type": "LineString", "coordinates": [[round(ax, 6), round(ay, 6)],
                                                              [round((ax + bx) / 2, 6), round((ay + by) / 2 + 0.01, 6)],
                                                              [round(bx, 6), round(by, 6)]]})
        a_doc["features"].append(tie)
        b_doc["features"].append(tie)
    for p, d in zip(paths, docs):
        _dump(p, d)

    # fixtures ---------------------------------------------------------------
    eia = []
    for j, (name, fuel, (lon, lat)) in enumerate(sorted(plants)):
        eia.append([name, fuel, 400.0 + 50 * (j % 5), lat, lon])
    # unmatched EIA plants available for injection
    for j, (code, lon0) in enumerate(TRI_STATES):
        eia.append([f"{code} Reserve Gas {j}", "NG", 500.0, 38.31, lon0 + 0.305])
        eia.append([f"{code} Remote Nuclear {j}", "NUC", 900.0, 39.9, lon0 + 0.5])
    _write_csv(fx / "eia860.csv", ["name", "fuel", "capacity_mw", "lat", "lon"], eia)
    _write_csv(fx / "eia923.csv", ["plant_name", "heat_rate_btu_per_kwh"],
               [[row[0], 7000 + 100 * i] for i, row in enumerate(eia) if row[1] in ("gas", "NG", "coal")])
    _write_csv(fx / "ba_parent.csv", ["code", "parent"], [["BA2X", "BA2"]])
    hours = [(h, 6000 + 3000 * math.sin(math.pi * (h - 4) / 24) ** 2) for h in range(24)]
    rows = []
    for h, mw in hours:
        rows.append(["BA1", f"2024-07-15T{h:02d}:00", round(2.0 * mw, 1)])
        rows.append(["BA2", f"2024-07-15T{h:02d}:00", round(1.2 * mw, 1)])
    _write_csv(fx / "ba_demand.csv", ["ba", "hour_utc", "mw"], rows)
    _write_csv(fx / "state_peaks.csv", ["state", "peak_mw"], [["AA", 2400.0], ["BB", 2200.0], ["CC", 1900.0]])
    polys = [
        _feature("BA1", {"ba": "BA1", "states": "AA;BB"},
                 {"type": "Polygon", "coordinates": [[[-82.0, 37.5], [-80.0, 37.5], [-80.0, 40.0], [-82.0, 40.0], [-82.0, 37.5]]]}),
        _feature("BA2", {"ba": "BA2", "states": "CC;DD"},
                 {"type": "Polygon", "coordinates": [[[-80.0, 37.5], [-79.4, 37.5], [-79.4, 40.0], [-80.0, 40.0], [-80.0, 37.5]]]}),
        _feature("BA2X", {"ba": "BA2X", "states": "CC"},
                 {"type": "Polygon", "coordinates": [[[-79.4, 37.5], [-78.5, 37.5], [-78.5, 40.0], [-79.4, 40.0], [-79.4, 37.5]]]}),
    ]
    _dump(fx / "ba_polygons.geojson", {"type": "FeatureCollection", "features": polys})
    tracts = []
    for i in range(12):
        for j in range(4):
            lon, lat = -82.0 + i * 0.3, 38.0 + j * 0.3
            tracts.append(_feature(f"t{i}_{j}", {"population": 1000 + 137 * ((i * 7 + j * 3) % 11)},
                                   {"type": "Polygon", "coordinates": [[[lon, lat], [lon + 0.3, lat], [lon + 0.3, lat + 0.3],
                                                                        [lon, lat + 0.3], [lon, lat]]]}))
    _dump(fx / "census_tracts.geojson", {"type": "FeatureCollection", "features": tracts})
    (fx / "gas_price.txt").write_text("3.50\n")
    _write_csv(fx / "eia_circuit_miles.csv", ["voltage_kv", "circuit_km"],
               [[345, 400.0], [230, 150.0], [138, 500.0], [115, 120.0], [69, 100.0]])
    return [str(p) for p in paths]
