"""Balancing-authority demand scaling, load allocation and initial dispatch."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from shapely import STRtree
from shapely.geometry import Point

from ._data import load_table
from .geo import haversine_m
from .ingest import normalize_name
from .parameters import INTERMITTENT_FUELS, RENEWABLE_FUELS, apply_generator_economics, normalize_fuel
from .topology.model import Generator

LOAD_POWER_FACTOR = 0.92
LOSS_FACTOR = 1.03
RESERVE_MARGIN = 1.30
INJECT_MAX_KM = 50.0
SECONDARY_MIN_SHARE = 0.01
FRACTION_BAND = (0.0, 1.5)


def load_q_ratio(power_factor=LOAD_POWER_FACTOR):
    return math.tan(math.acos(power_factor))


# ---------------------------------------------------------------------------
# balancing authorities


@dataclass
class BaAssignment:
    bus_ba: dict
    primary_ba: str
    secondary_bas: list  # [(code, share)]
    shares: dict  # retained code -> b_k, sums to 1
    scope: str = "single_ba"
    fractions: dict = field(default_factory=dict)
    sub_ba: dict = field(default_factory=dict)  # bus -> original polygon code
    c_osm: float | None = None

    def partitions(self):
        out = {}
        for bus, code in sorted(self.bus_ba.items()):
            out.setdefault(code, []).append(bus)
        return out


def _locate(points, polygons):
    """Index of the containing polygon per point, nearest polygon otherwise."""
    tree = STRtree(polygons)
    out = []
    for p in points:
        hits = sorted(int(i) for i in tree.query(p, predicate="intersects"))
        if hits:
            out.append((hits[0], True))
        else:
            out.append((int(tree.nearest(p)), False))
    return out


def detect_balancing_authorities(buses, ba_polygons, parent_map=None, generators=(), scope=None, diagnostics=None):
    """Assign every bus to a balancing authority.

    Sub-BA codes are resolved through ``parent_map`` so that demand is read
    under the reporting parent.  A secondary BA survives only with more
    than 1% of the buses and at least one generator; otherwise its buses
    join the primary.
    """
    diagnostics = Counter() if diagnostics is None else diagnostics
    parent_map = parent_map or {}
    if not ba_polygons:
        raise ValueError("no balancing-authority polygons")

    def resolve(code):
        seen = set()
        while code in parent_map and code not in seen:
            seen.add(code)
            code = parent_map[code]
        return code

    codes = sorted(ba_polygons)
    buses = sorted(buses, key=lambda b: b.id)
    located = _locate([Point(b.coord) for b in buses], [ba_polygons[c] for c in codes])
    sub_ba, bus_ba = {}, {}
    for bus, (idx, inside) in zip(buses, located):
        if not inside:
            diagnostics["bus_outside_ba_polygons"] += 1
        sub_ba[bus.id] = codes[idx]
        bus_ba[bus.id] = resolve(codes[idx])

    counts = Counter(bus_ba.values())
    primary = min(counts, key=lambda c: (-counts[c], c))
    gen_bas = {bus_ba[g.bus] for g in generators if g.bus in bus_ba}
    n = len(bus_ba)
    retained = [primary]
    for code in sorted(counts):
        if code == primary:
            continue
        if counts[code] / n > SECONDARY_MIN_SHARE and code in gen_bas:
            retained.append(code)
        else:
            diagnostics["ba_folded_into_primary"] += 1
            for b, c in bus_ba.items():
                if c == code:
                    bus_ba[b] = primary
    counts = Counter(bus_ba.values())
    shares = {c: counts[c] / n for c in retained}
    if scope is None:
        scope = "single_ba" if len(retained) == 1 else "multi_ba"
    for b in buses:
        b.ba_code = bus_ba[b.id]
    return BaAssignment(
        bus_ba=bus_ba,
        primary_ba=primary,
        secondary_bas=[(c, shares[c]) for c in retained[1:]],
        shares=shares,
        scope=scope,
        sub_ba=sub_ba,
    )


def _clamp_fraction(f, code, diagnostics):
    lo, hi = FRACTION_BAND
    if not lo <= f <= hi:
        diagnostics[f"fraction_out_of_band:{code}"] += 1
        return min(max(f, lo), hi)
    return f


def ba_installed_capacity(code, fixtures):
    """Sum of EIA-860 capacity inside the BA polygon (and its sub-BAs)."""
    polys = [g for c, g in fixtures.ba_polygons.items() if fixtures.resolve_ba(c) == code]
    total = 0.0
    for rec in fixtures.eia860_plants:
        p = Point(rec["lon"], rec["lat"])
        if any(poly.intersects(p) for poly in polys):
            total += rec["capacity_mw"]
    return total


def _ba_states(code, fixtures):
    states = set()
    for c, s in fixtures.ba_states.items():
        if c == code or fixtures.resolve_ba(c) == code:
            states.update(s)
    return states


def compute_regional_fractions(assignment, fixtures, model_capacity=None, states=(), generators=(), diagnostics=None):
    """Fraction f_k of each retained BA's demand that the model serves.

    ``states`` lists the modelled state codes.  ``model_capacity`` is the
    total OSM generation capacity (multi-BA case); per-BA model capacity
    in the region case is taken from ``generators``.
    """
    diagnostics = Counter() if diagnostics is None else diagnostics
    states = list(states)
    fractions = {}
    if assignment.scope == "region":
        region = set(states)
        for code in assignment.shares:
            served = _ba_states(code, fixtures)
            s_k = sorted(served & region) if served else sorted(region)
            f = sum(fixtures.state_peaks[s] for s in s_k) / fixtures.peak_mw(code)
            if served and not served <= region:
                p_model = sum(g.p_max_mw for g in generators if assignment.bus_ba.get(g.bus) == code)
                p_ba = ba_installed_capacity(code, fixtures)
                f *= min(1.0, p_model / p_ba) if p_ba > 0 else 1.0
            fractions[code] = _clamp_fraction(f, code, diagnostics)
    else:
        if len(states) != 1:
            raise ValueError("single-state scopes need exactly one state code")
        state_peak = fixtures.state_peaks[states[0]]
        if assignment.scope == "single_ba" and len(assignment.shares) == 1:
            code = assignment.primary_ba
            fractions[code] = _clamp_fraction(state_peak / fixtures.peak_mw(code), code, diagnostics)
        else:
            if model_capacity is None:
                model_capacity = sum(g.p_max_mw for g in generators)
            c_osm = min(1.0, model_capacity / state_peak)
            assignment.c_osm = c_osm
            for code, b_k in assignment.shares.items():
                f = state_peak * b_k / fixtures.peak_mw(code) * c_osm
                fractions[code] = _clamp_fraction(f, code, diagnostics)
    assignment.fractions = fractions
    return fractions


def partition_demand(assignment, fixtures, hour, date=None):
    """MW per retained BA for the requested hour."""
    return {code: f * fixtures.demand_mw(code, hour, date) for code, f in sorted(assignment.fractions.items())}


# ---------------------------------------------------------------------------
# loads


@dataclass
class LoadSet:
    p_mw: dict
    q_mvar: dict
    hour: int | None = None
    date: str | None = None

    @property
    def total_p(self):
        return sum(self.p_mw.values())

    @property
    def total_q(self):
        return sum(self.q_mvar.values())


def tract_populations(buses, tracts):
    """Population of the tract containing each bus (nearest tract otherwise)."""
    if not tracts:
        return {b.id: 0.0 for b in buses}
    located = _locate([Point(b.coord) for b in buses], [t["polygon"] for t in tracts])
    return {b.id: float(tracts[i]["population"]) for b, (i, _inside) in zip(buses, located)}


def allocate_loads(partition_mw, buses, tracts, bus_partition=None, hour=None, date=None,
                   power_factor=LOAD_POWER_FACTOR, diagnostics=None):
    """Split each partition's demand across its buses by tract population.

    ``bus_partition`` maps bus id -> partition code; without it every bus
    belongs to the single partition in ``partition_mw``.
    """
    diagnostics = Counter() if diagnostics is None else diagnostics
    buses = sorted(buses, key=lambda b: b.id)
    if bus_partition is None:
        (only,) = partition_mw
        bus_partition = {b.id: only for b in buses}
    pops = tract_populations(buses, tracts)
    ratio = load_q_ratio(power_factor)
    p, q = {}, {}
    for code, total in sorted(partition_mw.items()):
        members = [b.id for b in buses if bus_partition.get(b.id) == code]
        if not members:
            diagnostics[f"partition_without_buses:{code}"] += 1
            continue
        weights = np.array([pops[i] for i in members], dtype=float)
        if weights.sum() <= 0:
            diagnostics[f"zero_population_uniform_split:{code}"] += 1
            weights = np.ones(len(members))
        shares = weights / weights.sum()
        for bid, s in zip(members, shares):
            p[bid] = float(total * s)
            q[bid] = p[bid] * ratio
    for b in buses:
        p.setdefault(b.id, 0.0)
        q.setdefault(b.id, 0.0)
    return LoadSet(p_mw=p, q_mvar=q, hour=hour, date=date)


def apply_loads(model, loads):
    for b in model.buses:
        b.p_load_mw = loads.p_mw.get(b.id, 0.0)
        b.q_load_mvar = loads.q_mvar.get(b.id, 0.0)


# ---------------------------------------------------------------------------
# renewables and dispatch


def season_of(month):
    if month in (6, 7, 8):
        return "summer"
    if month in (12, 1, 2):
        return "winter"
    return "shoulder"


def capacity_factor(fuel_display, hour, month, profiles=None):
    if fuel_display not in INTERMITTENT_FUELS:
        return 1.0
    profiles = profiles or load_table("profiles.toml")
    return float(profiles[fuel_display.lower()][season_of(month)][hour % 24])


def derate_renewables(generators, hour, month, profiles=None):
    """Set and return the available capacity of every generator for one hour."""
    out = {}
    for g in generators:
        display = g.fuel_display or normalize_fuel(g.fuel_raw)[1]
        g.available_mw = g.p_max_mw * capacity_factor(display, hour, month, profiles)
        out[g.id] = g.available_mw
    return out


@dataclass
class DispatchPlan:
    p_set_mw: dict
    committed: dict
    derated_p_max: dict
    load_mw: float
    d_gross_mw: float
    capacity_mw: float
    injected_generators: list = field(default_factory=list)

    @property
    def capacity_deficient(self):
        return self.capacity_mw < self.d_gross_mw

    @property
    def reserve_margin_achieved(self):
        return self.capacity_mw / self.load_mw - 1.0 if self.load_mw > 0 else math.inf


def merit_key(g):
    return (g.c1, -g.p_max_mw, g.id)


def merit_order_dispatch(generators, total_load_mw, loss_factor=LOSS_FACTOR):
    """Commit generators cheapest-first until gross demand is met."""
    d_gross = loss_factor * total_load_mw
    avail = {g.id: g.available_mw if g.available_mw is not None else g.p_max_mw for g in generators}
    remaining = d_gross
    p_set, committed = {}, {}
    for g in sorted(generators, key=merit_key):
        take = min(avail[g.id], remaining) if remaining > 0 else 0.0
        p_set[g.id] = take
        committed[g.id] = take > 0
        remaining -= take
        g.p_set_mw = take
        g.committed = take > 0
    return DispatchPlan(
        p_set_mw=p_set,
        committed=committed,
        derated_p_max=avail,
        load_mw=total_load_mw,
        d_gross_mw=d_gross,
        capacity_mw=sum(avail.values()),
    )


def _available(model):
    return sum(g.available_mw if g.available_mw is not None else g.p_max_mw for g in model.generators)


def inject_eia_generators(model, demand_mw, fixtures, hour=16, month=7, reserve=RESERVE_MARGIN,
                          max_km=INJECT_MAX_KM, diagnostics=None):
    """Add unmatched EIA-860 plants until available capacity reaches the reserve.

    Plants are taken by capacity descending and attached to the nearest bus
    within ``max_km`` that still has a free connection slot (one slot per
    branch incident to the bus).  Returns the injected generators.
    """
    diagnostics = Counter() if diagnostics is None else diagnostics
    if _available(model) >= reserve * demand_mw:
        return []
    taken = {normalize_name(g.eia_name) for g in model.generators if g.eia_name}
    used_slots = Counter(g.bus for g in model.generators if g.source == "eia")
    degree = model.degree()
    buses = sorted(model.buses, key=lambda b: b.id)
    xy = np.array([b.coord for b in buses])
    candidates = [r for r in fixtures.eia860_plants if normalize_name(r["name"]) not in taken and r["capacity_mw"] > 0]
    candidates.sort(key=lambda r: (-r["capacity_mw"], normalize_name(r["name"])))
    injected = []
    next_id = max((g.id for g in model.generators), default=0) + 1
    for rec in candidates:
        if _available(model) >= reserve * demand_mw:
            break
        d = np.atleast_1d(haversine_m(rec["lon"], rec["lat"], xy[:, 0], xy[:, 1]))
        order = sorted(range(len(buses)), key=lambda i: (d[i], buses[i].id))
        bus = next(
            (buses[i].id for i in order if d[i] <= max_km * 1000.0 and used_slots[buses[i].id] < degree[buses[i].id]),
            None,
        )
        if bus is None:
            diagnostics["eia_plant_no_bus_slot"] += 1
            continue
        g = Generator(
            id=next_id, bus=bus, p_max_mw=float(rec["capacity_mw"]), fuel_raw=rec["fuel_raw"],
            name=rec["name"], coord=(rec["lon"], rec["lat"]), source="eia",
            eia_matched=True, eia_name=rec["name"],
        )
        apply_generator_economics(g, fixtures)
        g.available_mw = g.p_max_mw * capacity_factor(g.fuel_display, hour, month)
        model.generators.append(g)
        used_slots[bus] += 1
        taken.add(normalize_name(rec["name"]))
        injected.append(g)
        next_id += 1
    if _available(model) < reserve * demand_mw:
        diagnostics["reserve_margin_not_met"] += 1
    diagnostics["eia_injected"] += len(injected)
    return injected


def reassign_slack(model, plan=None, diagnostics=None):
    """Move the slack to the largest committed non-renewable generator."""
    diagnostics = Counter() if diagnostics is None else diagnostics
    committed = plan.committed if plan is not None else {g.id: g.committed for g in model.generators}
    cands = [
        g for g in model.generators
        if committed.get(g.id, False) and (g.fuel_display or normalize_fuel(g.fuel_raw)[1]) not in RENEWABLE_FUELS
    ]
    if not cands:
        diagnostics["slack_no_dispatchable_candidate"] += 1
        return model.slack_bus.id if model.slack_bus else None
    best = max(cands, key=lambda g: (g.p_max_mw, -g.id))
    for b in model.buses:
        b.is_slack = b.id == best.bus
    return best.bus
