"""Plant-to-bus assignment with EIA-860 capacity reconciliation."""

from __future__ import annotations

from collections import Counter

import numpy as np

from ..geo import haversine_m
from ..ingest import normalize_name
from ..parameters import normalize_fuel
from .model import Generator

MAX_ASSIGN_M = 1000.0
EIA_MATCH_M = 5000.0
UNNAMED_MATCH_M = 1000.0
INITIAL_DISPATCH_FRAC = 0.5


def nearest_bus(lon, lat, buses, max_m=None, allowed=None):
    """(bus id, distance m) of the closest bus; ties go to the lower id."""
    cands = [b for b in buses if allowed is None or b.id in allowed]
    if not cands:
        return None, None
    cands = sorted(cands, key=lambda b: b.id)
    xy = np.array([b.coord for b in cands])
    d = haversine_m(lon, lat, xy[:, 0], xy[:, 1])
    d = np.atleast_1d(d)
    i = int(np.argmin(d))  # first minimum -> lowest id
    if max_m is not None and d[i] > max_m:
        return None, float(d[i])
    return cands[i].id, float(d[i])


def _names_match(a, b):
    a, b = normalize_name(a), normalize_name(b)
    if not a or not b:
        return False
    return a == b or a in b or b in a


def _fuels_compatible(raw_a, raw_b):
    da = normalize_fuel(raw_a)[1]
    db = normalize_fuel(raw_b)[1]
    return da == "Unknown" or db == "Unknown" or da == db


def match_eia(plant, eia_plants, used):
    """Index of the EIA-860 record matching ``plant`` or None.

    Name, fuel and distance (<= 5 km) must agree; unnamed plants fall back
    to the closest same-fuel record within 1 km.
    """
    best = None
    lon, lat = plant.coord
    for i, rec in enumerate(eia_plants):
        if i in used:
            continue
        d = haversine_m(lon, lat, rec["lon"], rec["lat"])
        if plant.name:
            ok = d <= EIA_MATCH_M and _names_match(plant.name, rec["name"])
        else:
            ok = d <= UNNAMED_MATCH_M
        if ok and plant.source and not _fuels_compatible(plant.source, rec["fuel_raw"]):
            ok = False
        if ok and (best is None or (d, i) < best):
            best = (d, i)
    return None if best is None else best[1]


def assign_generators(plants, buses, eia_plants=(), max_distance_m=MAX_ASSIGN_M, diagnostics=None):
    """Attach each plant to its nearest bus within ``max_distance_m``.

    Returns ``(generators, used_eia_indices)``.
    """
    diagnostics = Counter() if diagnostics is None else diagnostics
    eia_plants = list(eia_plants)
    used = set()
    gens = []
    for plant in sorted(plants, key=lambda p: p.id):
        bus, dist = nearest_bus(plant.coord[0], plant.coord[1], buses, max_distance_m)
        if bus is None:
            diagnostics["plant_no_bus_within_1km"] += 1
            continue
        j = match_eia(plant, eia_plants, used)
        capacity = plant.output_mw
        fuel = plant.source
        eia_name = None
        if j is not None:
            used.add(j)
            rec = eia_plants[j]
            capacity = rec["capacity_mw"]
            fuel = fuel or rec["fuel_raw"]
            eia_name = rec["name"]
        if not capacity or capacity <= 0:
            diagnostics["plant_without_capacity"] += 1
            continue
        gens.append(
            Generator(
                id=len(gens) + 1,
                bus=bus,
                p_max_mw=float(capacity),
                fuel_raw=fuel,
                name=plant.name or eia_name,
                coord=plant.coord,
                source="osm",
                osm_id=plant.id,
                eia_matched=j is not None,
                eia_name=eia_name,
                p_set_mw=INITIAL_DISPATCH_FRAC * float(capacity),
            )
        )
    diagnostics["plants_assigned"] += len(gens)
    diagnostics["eia_matched"] += len(used)
    return gens, used
