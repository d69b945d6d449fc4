"""Voltage inference by neighbour consensus, and the transmission filter."""

from __future__ import annotations

from collections import Counter
from dataclasses import replace

from ..geo import snap
from .footprints import build_endpoint_index

MAX_ITERATIONS = 10
TRANSMISSION_MIN_KV = 69.0


def _vote(pools):
    """Apply the consensus rules to per-endpoint vote lists.

    Rule 1: at some endpoint every neighbour vote agrees (if both endpoints
    are unanimous they must agree with each other).  Rule 2: at least three
    votes overall and one value holds >= 2/3 of them.
    """
    unanimous = {pool[0] for pool in pools if pool and len(set(pool)) == 1}
    if len(unanimous) == 1:
        return unanimous.pop()
    votes = [v for pool in pools for v in pool]
    if len(votes) >= 3:
        (value, count), *rest = sorted(Counter(votes).items(), key=lambda kv: (-kv[1], -kv[0]))
        if 3 * count >= 2 * len(votes):
            return value
    return None


def infer_voltages(sections, footprints=None, max_iterations=MAX_ITERATIONS):
    """Fill missing voltages from co-located neighbours.

    Each iteration evaluates every untagged section against the state at the
    start of the iteration, so the result does not depend on input order.
    Voltages of a substation containing the endpoint join the vote pool.

    Returns ``(sections, stats)``.
    """
    sections = sorted(sections, key=lambda s: s.id)
    index = build_endpoint_index(sections, footprints)
    current = {s.id: s for s in sections}
    tagged = sum(1 for s in sections if s.voltages_kv)

    iterations = 0
    for _ in range(max_iterations):
        updates = {}
        for s in sections:
            if current[s.id].voltages_kv:
                continue
            pools = []
            for end_lon, end_lat in s.endpoints:
                key = snap(end_lon, end_lat)
                pool = []
                for other_id, _end in index[key]:
                    if other_id == s.id:
                        continue
                    pool.extend(current[other_id].voltages_kv)
                fac = index.facility_at(key)
                if fac is not None and footprints is not None:
                    pool.extend(footprints.voltages(fac))
                pools.append(pool)
            v = _vote(pools)
            if v is not None:
                updates[s.id] = v
        if not updates:
            break
        iterations += 1
        for sid, v in updates.items():
            current[sid] = replace(current[sid], voltages_kv=(v,), voltage_source="inferred")

    out = [current[s.id] for s in sections]
    inferred = sum(1 for s in out if s.voltage_source == "inferred")
    stats = {
        "sections": len(out),
        "tagged": tagged,
        "inferred": inferred,
        "unresolved": len(out) - tagged - inferred,
        "iterations": iterations,
    }
    return out, stats


def filter_transmission(sections, min_kv=TRANSMISSION_MIN_KV):
    """Keep sections with a resolved voltage of at least ``min_kv``.

    Sub-threshold entries of multi-voltage lists are dropped as well.
    """
    kept = []
    for s in sections:
        volts = tuple(v for v in s.voltages_kv if v >= min_kv)
        if not volts:
            continue
        kept.append(s if volts == s.voltages_kv else replace(s, voltages_kv=volts))
    return kept
