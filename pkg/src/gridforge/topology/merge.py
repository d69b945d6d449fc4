"""Stitching of fragmented ways into continuous circuits."""

from __future__ import annotations

import math
from collections import Counter, defaultdict

from ..geo import path_length_km, snap
from .circuits import resolve_circuit_counts
from .model import CircuitRecord
from .unionfind import UnionFind


def _heading(path, end):
    """Direction (radians) of the segment leaving the endpoint ``end``."""
    if end == 0:
        (x0, y0), (x1, y1) = path[0], path[1]
    else:
        (x0, y0), (x1, y1) = path[-1], path[-2]
    return math.atan2(y1 - y0, (x1 - x0) * math.cos(math.radians(y0)))


def _straightest_pair(ends, paths):
    best = None
    for i in range(len(ends)):
        for j in range(i + 1, len(ends)):
            a, b = ends[i], ends[j]
            if a[0] == b[0]:
                continue
            turn = abs(abs(_heading(paths[a[0][0]], a[1]) - _heading(paths[b[0][0]], b[1])) - math.pi)
            turn = min(turn, abs(2 * math.pi - turn))
            cand = (round(turn, 9), a, b)
            if best is None or cand < best:
                best = cand
    return None if best is None else (best[1], best[2])


def merge_lines(sections, index, mode="trust_voltage", diagnostics=None):
    """Union-find merge of line sections into circuit groups.

    Nodes are (section, circuit) pairs; two nodes merge at a shared grid
    cell when they carry the same circuit class (voltage, ordinal, AC/DC)
    and the cell is not inside a facility.  Where three or more compatible
    ends meet, only the straightest pair is joined and the others become
    spurs.  Returns a list of CircuitRecord ordered by key.
    """
    diagnostics = Counter() if diagnostics is None else diagnostics
    sections = sorted(sections, key=lambda s: s.id)
    by_id = {s.id: s for s in sections}
    paths = {s.id: s.path for s in sections}

    nodes = []
    for s in sections:
        if path_length_km(s.path) <= 0:
            diagnostics["zero_length_section"] += 1
            continue
        for spec in resolve_circuit_counts(s, mode, diagnostics):
            nodes.append((s.id, spec))

    uf = UnionFind(nodes)
    ends_at = defaultdict(list)  # (cell, circuit class) -> [(node, end)]
    for node in nodes:
        sid, spec = node
        for end, (lon, lat) in enumerate(by_id[sid].endpoints):
            ends_at[(snap(lon, lat), spec)].append((node, end))

    links = defaultdict(dict)  # node -> {end: (other node, other end)}
    spur_ends = set()
    for (cell, _spec), ends in sorted(ends_at.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        if len(ends) < 2 or index.facility_at(cell) is not None:
            continue
        ends = sorted(ends)
        if len(ends) == 2:
            pair = (ends[0], ends[1]) if ends[0][0] != ends[1][0] else None
        else:
            pair = _straightest_pair(ends, paths)
            spur_ends.update(e for e in ends if pair is None or e not in pair)
        if pair is None:
            continue
        (na, ea), (nb, eb) = pair
        uf.union(na, nb)
        links[na][ea] = (nb, eb)
        links[nb][eb] = (na, ea)

    records = []
    for root, members in uf.groups().items():
        records.append(_build_record(root, members, links, by_id, spur_ends))
    records.sort(key=lambda r: r.key)
    return records


def _walk(start, start_end, links, limit):
    """Ordered (node, reversed) traversal from ``start`` entering at ``start_end``."""
    order = []
    node, entry = start, start_end
    seen = set()
    while node is not None and node not in seen and len(order) < limit:
        seen.add(node)
        exit_end = 1 - entry
        order.append((node, entry == 1))
        nxt = links.get(node, {}).get(exit_end)
        if nxt is None:
            break
        node, entry = nxt
    return order


def _build_record(root, members, links, by_id, spur_ends):
    free = [(m, e) for m in members for e in (0, 1) if e not in links.get(m, {})]
    ring = not free
    if ring:
        order = _walk(members[0], 0, links, len(members))
    else:
        start, end = min(free)
        order = _walk(start, end, links, len(members))

    path = []
    section_ids = []
    underground_km = 0.0
    total_km = 0.0
    name = None
    for node, rev in order:
        sid = node[0]
        s = by_id[sid]
        pts = list(reversed(s.path)) if rev else list(s.path)
        if path and snap(*path[-1]) == snap(*pts[0]):
            pts = pts[1:]
        path.extend(pts)
        section_ids.append(sid)
        km = path_length_km(s.path)
        total_km += km
        if s.is_underground:
            underground_km += km
        name = name or s.name

    spec = root[1]
    if ring:
        endpoints = (None, None)
    else:
        endpoints = (snap(*path[0]), snap(*path[-1]))
    first_node, first_rev = order[0]
    last_node, last_rev = order[-1]
    spurs = (
        (first_node, 1 if first_rev else 0) in spur_ends,
        (last_node, 0 if last_rev else 1) in spur_ends,
    )
    rec = CircuitRecord(
        key=f"{root[0]}|{spec.key}",
        section_ids=section_ids,
        path=path,
        endpoints=endpoints,
        voltage_kv=spec.voltage_kv,
        is_hvdc=spec.is_hvdc,
        length_km=total_km,
        is_underground=underground_km > 0.5 * total_km,
        name=name,
        spur_ends=spurs,
        interior_cells=frozenset(snap(*p) for p in path[1:-1]),
    )
    return rec
