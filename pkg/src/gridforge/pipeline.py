"""End-to-end orchestration: features and fixtures in, model and solutions out."""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from datetime import date as _date
from pathlib import Path

import numpy as np

from . import demand as dm
from .geo import path_length_km
from .ingest import GeoJSONError, _feature_id, iter_features, load_fixture_tables, parse_feature_collection
from .opf import DEFAULT_PLAN, RelaxationPlan, network_to_matpower, to_per_unit
from .opf.ladder import progressive_solve
from .parameters import nearest_class, parameterize_network
from .topology import (
    assign_generators,
    build_endpoint_index,
    build_facility_footprints,
    build_line_branches,
    classification_counts,
    classify_circuits,
    create_buses,
    detect_hvdc_links,
    filter_transmission,
    finalize_network,
    infer_transformers,
    infer_voltages,
    merge_lines,
    promote_converter_lines,
)

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
COVERAGE_FLAGS = (0.7, 2.0)


class PipelineError(RuntimeError):
    def __init__(self, stage, message, exit_code):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.exit_code = exit_code


@dataclass
class RunConfig:
    inputs: list
    fixture_dir: str
    out_dir: str
    hour: int = 16
    date: str | None = None
    multi_state: bool | None = None  # None: inferred from the number of inputs
    states: list = field(default_factory=list)  # state codes; inferred from file stems if empty
    max_level: str = "L5"
    run_ac: bool = True
    solve: bool = True
    circuit_mode: str = "trust_voltage"
    ac_timeout_s: float = 1800.0

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("at least one input GeoJSON is required")
        if not 0 <= int(self.hour) <= 23:
            raise ValueError("hour must lie in 0..23")

    @property
    def month(self):
        return _date.fromisoformat(self.date).month if self.date else 7


# ---------------------------------------------------------------------------
# serialization


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return 0.0 if v == 0 else v
    return obj


def dumps(obj):
    """Canonical JSON: sorted keys, shortest round-trip floats, no NaN."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


# ---------------------------------------------------------------------------
# stage helpers


def merge_states(collections, diagnostics=None):
    """Union of several FeatureCollections, deduplicated by OSM id.

    The first occurrence of an id wins; a later copy with different
    properties or geometry is counted as a conflict.
    """
    diagnostics = Counter() if diagnostics is None else diagnostics
    seen = {}
    merged = []
    for data in collections:
        for index, feat in enumerate(iter_features(data)):
            fid = _feature_id(feat, index)
            if fid is None:
                merged.append(feat)
                continue
            if fid in seen:
                diagnostics["duplicate_feature"] += 1
                if seen[fid] != feat:
                    diagnostics["duplicate_feature_conflict"] += 1
                continue
            seen[fid] = feat
            merged.append(feat)
    return {"type": "FeatureCollection", "features": merged}


def emit_coverage_diagnostics(sections, eia_circuit_km):
    """Route-km per voltage class over fixture circuit-km, with flags.

    Classes without fixture mileage or without mapped routes are omitted.
    """
    classes = sorted(eia_circuit_km)
    if not classes:
        return []
    route = Counter()
    for s in sections:
        km = path_length_km(s.path)
        for v in set(nearest_class(v, classes) for v in s.voltages_kv):
            route[v] += km
    rows = []
    lo, hi = COVERAGE_FLAGS
    for v in sorted(classes, reverse=True):
        if route[v] <= 0 or eia_circuit_km[v] <= 0:
            continue
        ratio = route[v] / eia_circuit_km[v]
        flag = "over-mapped" if ratio > hi else "under-mapped" if ratio < lo else None
        rows.append({"voltage_kv": v, "osm_route_km": route[v], "eia_circuit_km": eia_circuit_km[v],
                     "ratio": ratio, "flag": flag})
    return rows


def build_topology(parsed, fixtures, multi_state=False, circuit_mode="trust_voltage", diagnostics=None):
    """Stage 2: sections and facilities to a finalized NetworkModel."""
    diagnostics = Counter() if diagnostics is None else diagnostics
    stats = {}
    footprints = build_facility_footprints(parsed.facilities)
    sections, vstats = infer_voltages(parsed.line_sections, footprints)
    stats["voltage"] = vstats
    sections = filter_transmission(sections)
    stats["transmission_sections"] = len(sections)
    index = build_endpoint_index(sections, footprints)
    circuits = merge_lines(sections, index, circuit_mode, diagnostics)
    classify_circuits(circuits, footprints)
    stats["classification"] = classification_counts(circuits)
    stats["circuits"] = len(circuits)
    converters = parsed.converters
    promoted = promote_converter_lines(circuits, converters)
    ac = [c for c in circuits if not c.is_hvdc and c.classification == "inter_facility"]
    busset = create_buses(ac, footprints)
    lines = build_line_branches(ac, busset)
    transformers, lines = infer_transformers(busset.buses, lines)
    branches = lines + transformers
    gens, _used = assign_generators(parsed.plants(), busset.buses, fixtures.eia860_plants, diagnostics=diagnostics)
    links, _ = detect_hvdc_links(circuits, converters, busset.buses, diagnostics=diagnostics)
    stats["hvdc_promoted"] = len(promoted)
    stats["pre_finalize"] = {"buses": len(busset.buses), "ac_lines": len(lines), "transformers": len(transformers),
                             "generators": len(gens), "dclinks": len(links)}
    model, fstats = finalize_network(busset.buses, branches, gens, links, multi_state)
    stats["finalize"] = fstats
    model.stats = stats
    return model, sections, stats


def apply_demand(model, fixtures, config, states, diagnostics):
    """Stage 4: BA assignment, loads, derating, dispatch, injection, slack."""
    scope = "region" if len(states) > 1 else None
    assignment = dm.detect_balancing_authorities(
        model.buses, fixtures.ba_polygons, fixtures.ba_parent_map, model.generators, scope, diagnostics
    )
    dm.compute_regional_fractions(assignment, fixtures, states=states, generators=model.generators,
                                  diagnostics=diagnostics)
    part = dm.partition_demand(assignment, fixtures, config.hour, config.date)
    loads = dm.allocate_loads(part, model.buses, fixtures.census_tracts, assignment.bus_ba, config.hour,
                              config.date, diagnostics=diagnostics)
    dm.apply_loads(model, loads)
    dm.derate_renewables(model.generators, config.hour, config.month)
    total = loads.total_p
    injected = dm.inject_eia_generators(model, total, fixtures, config.hour, config.month, diagnostics=diagnostics)
    plan = dm.merit_order_dispatch(model.generators, total)
    plan.injected_generators = [g.id for g in injected]
    slack = dm.reassign_slack(model, plan, diagnostics)
    return {
        "primary_ba": assignment.primary_ba,
        "scope": assignment.scope,
        "shares": assignment.shares,
        "fractions": assignment.fractions,
        "c_osm": assignment.c_osm,
        "partition_mw": part,
        "total_load_mw": total,
        "total_q_mvar": loads.total_q,
        "d_gross_mw": plan.d_gross_mw,
        "available_mw": plan.capacity_mw,
        "capacity_deficient": plan.capacity_deficient,
        "reserve_margin": plan.reserve_margin_achieved,
        "injected": [{"id": g.id, "name": g.name, "p_max_mw": g.p_max_mw, "bus": g.bus, "fuel": g.fuel_display}
                     for g in injected],
        "slack_bus": slack,
        "bus_load_mw": {b.id: b.p_load_mw for b in model.buses},
    }


def solution_record(sol, net, report=None):
    if sol is None:
        return {"status": "failed", "attempts": report.attempts if report else []}
    base = sol.base_mva
    out = {
        "status": sol.status,
        "formulation": sol.formulation,
        "level": sol.level,
        "ac1": sol.ac1,
        "objective_usd_per_hr": sol.objective,
        "iterations": sol.iterations,
        "total_generation_mw": sol.total_generation_mw,
        "served_load_mw": sol.served_mw,
        "demand_mw": sol.demand_pu * base,
        "total_loss_mw": sol.total_loss_mw,
        "loss_pct": sol.loss_pct,
        "cost_usd_per_mwh": sol.objective / sol.served_mw if sol.served_mw > 0 else None,
        "gen": [{"id": int(gid), "p_mw": p * base, "q_mvar": q * base}
                for gid, p, q in zip(net.gen_ids, sol.pg, sol.qg)],
        "bus": [{"id": int(bid), "vm": vm, "va_deg": math.degrees(va)}
                for bid, vm, va in zip(net.bus_ids, sol.vm, sol.va)],
        "branch": [{"id": int(k), "p_from_mw": pf * base, "q_from_mvar": qf * base,
                    "p_to_mw": pt * base, "q_to_mvar": qt * base}
                   for k, pf, qf, pt, qt in zip(net.br_ids, sol.p_from, sol.q_from, sol.p_to, sol.q_to)],
    }
    if report is not None:
        out["attempts"] = report.attempts
    return out


def topology_geojson(model):
    buses = model.bus_index()
    feats = []
    for b in model.buses:
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": list(b.coord)},
            "properties": {"kind": "bus", "id": b.id, "base_kv": b.base_kv, "slack": b.is_slack,
                           "p_load_mw": b.p_load_mw, "ba": b.ba_code},
        })
    for br in model.branches:
        feats.append({
            "type": "Feature",
            "geometry": {"type": "LineString",
                         "coordinates": [list(buses[br.from_bus].coord), list(buses[br.to_bus].coord)]},
            "properties": {"kind": br.kind, "id": br.id, "from": br.from_bus, "to": br.to_bus,
                           "rate_mva": br.rate_mva},
        })
    for d in model.dclinks:
        feats.append({
            "type": "Feature",
            "geometry": {"type": "LineString",
                         "coordinates": [list(buses[d.from_bus].coord), list(buses[d.to_bus].coord)]},
            "properties": {"kind": "dcline", "id": d.id, "p_max_mw": d.p_max_mw},
        })
    for g in model.generators:
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": list(buses[g.bus].coord)},
            "properties": {"kind": "generator", "id": g.id, "bus": g.bus, "p_max_mw": g.p_max_mw,
                           "fuel": g.fuel_display, "source": g.source, "c1": g.c1},
        })
    return {"type": "FeatureCollection", "features": feats}


def _states_for(config, fixtures):
    if config.states:
        return list(config.states)
    stems = [Path(p).stem.upper() for p in config.inputs]
    if all(s in fixtures.state_peaks for s in stems):
        return stems
    if len(fixtures.state_peaks) == 1:
        return list(fixtures.state_peaks)
    raise ValueError("cannot infer state codes; pass them explicitly")


def plan_up_to(max_level, plan=DEFAULT_PLAN):
    names = plan.names
    if max_level not in names:
        raise ValueError(f"unknown relaxation level {max_level}")
    return RelaxationPlan(levels=plan.levels[: names.index(max_level) + 1], ac1=plan.ac1)


def solve_network(net, plan=DEFAULT_PLAN, run_ac=True, timeout_s=1800.0):
    dc, ac, rep = progressive_solve(net, plan, run_ac=run_ac, timeout_s=timeout_s)
    return dc, ac, rep


# ---------------------------------------------------------------------------


def run_pipeline(config):
    """Run every stage and write the artifacts into ``config.out_dir``.

    Artifacts: model.json, solution_dc.json, solution_ac.json, report.json,
    topology.geojson (all byte-stable) plus timings.json.  On failure the
    artifacts produced so far are kept, report.json records the error and a
    PipelineError carrying the exit code is raised.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    diagnostics = Counter()
    report = {"config": {"inputs": [Path(p).name for p in config.inputs], "hour": config.hour,
                         "date": config.date, "max_level": config.max_level}}
    timings = {}
    stage = "ingest"

    def fail(exc, code):
        report["error"] = {"stage": stage, "message": str(exc), "exit_code": code}
        report["diagnostics"] = dict(sorted(diagnostics.items()))
        write_json(out / "report.json", report)
        write_json(out / "timings.json", timings)
        raise PipelineError(stage, str(exc), code) from exc

    t = time.perf_counter()
    try:
        raw = [Path(p).read_bytes() for p in config.inputs]
        fixtures = load_fixture_tables(config.fixture_dir)
    except OSError as exc:
        fail(exc, EXIT_IO)
    try:
        multi = config.multi_state if config.multi_state is not None else len(raw) > 1
        merged = merge_states(raw, diagnostics) if len(raw) > 1 else raw[0]
        parsed = parse_feature_collection(merged)
        diagnostics.update(parsed.diagnostics)
        report["ingest"] = parsed.counts()
        report["multi_state"] = multi
        states = _states_for(config, fixtures)
        report["states"] = states
        timings["ingest"] = time.perf_counter() - t

        stage = "topology"
        t = time.perf_counter()
        model, sections, tstats = build_topology(parsed, fixtures, multi, config.circuit_mode, diagnostics)
        report["topology"] = tstats
        report["coverage"] = emit_coverage_diagnostics(sections, fixtures.eia_circuit_km)
        timings["topology"] = time.perf_counter() - t

        stage = "parameters"
        t = time.perf_counter()
        parameterize_network(model, fixtures)
        timings["parameters"] = time.perf_counter() - t

        stage = "demand"
        t = time.perf_counter()
        report["demand"] = apply_demand(model, fixtures, config, states, diagnostics)
        timings["demand"] = time.perf_counter() - t

        stage = "opf"
        net = to_per_unit(model)
    except (GeoJSONError, ValueError, KeyError, RuntimeError) as exc:
        fail(exc, EXIT_VALIDATION)

    write_json(out / "model.json", network_to_matpower(net))
    write_json(out / "topology.geojson", topology_geojson(model))
    report["model"] = {"buses": net.n_bus, "branches": net.n_branch, "generators": net.n_gen,
                       "dclines": net.n_dc, "load_mw": float(net.pd.sum() * net.base_mva),
                       "capacity_mw": float(net.pmax.sum() * net.base_mva)}

    result = {"report": report, "model": model, "net": net, "dc": None, "ac": None}
    if config.solve:
        t = time.perf_counter()
        dc, ac, ladder = solve_network(net, plan_up_to(config.max_level), config.run_ac, config.ac_timeout_s)
        timings["opf"] = time.perf_counter() - t
        write_json(out / "solution_dc.json", solution_record(dc, net))
        if config.run_ac:
            write_json(out / "solution_ac.json", solution_record(ac, net, ladder))
        report["opf"] = ladder.as_dict()
        result.update(dc=dc, ac=ac)
        if dc is None or (config.run_ac and ac is None):
            diagnostics["opf_terminal_failure"] += 1
            report["diagnostics"] = dict(sorted(diagnostics.items()))
            stage = "opf"
            fail(RuntimeError("no relaxation level converged"), EXIT_SOLVER)
    report["diagnostics"] = dict(sorted(diagnostics.items()))
    write_json(out / "report.json", report)
    write_json(out / "timings.json", timings)
    return result
