"""Bus creation, multi-voltage splitting and transformer inference."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..geo import unsnap
from .model import Branch, Bus
from .unionfind import UnionFind

ADHOC_CLUSTER_DEG = 0.0005  # ~50 m
SPLIT_RATIO = 1.2
XFMR_MIN_DIFF_KV = 10.0
XFMR_MIN_RATIO = 1.2
CATCHALL_RATIO = 1.10


@dataclass
class BusSet:
    buses: list = field(default_factory=list)
    endpoint_bus: dict = field(default_factory=dict)  # (circuit key, end) -> bus id

    def by_id(self):
        return {b.id: b for b in self.buses}


def split_voltage_levels(voltages, ratio=SPLIT_RATIO):
    """Group voltages (highest first) so no two groups are within ``ratio``.

    Each group is keyed by its highest member, which becomes the bus base kV.
    """
    groups = []
    for v in sorted(set(voltages), reverse=True):
        if groups and groups[-1][0] / v <= ratio:
            groups[-1].append(v)
        else:
            groups.append([v])
    return groups


def create_buses(circuits, footprints=None, cluster_deg=ADHOC_CLUSTER_DEG, split_ratio=SPLIT_RATIO):
    """Create buses for the endpoints of the given AC circuits.

    Endpoints inside a facility footprint group by facility; the rest are
    clustered by union-find within ``cluster_deg``.  Each spatial cluster is
    split into one bus per voltage level.
    """
    circuits = sorted((c for c in circuits if not c.is_hvdc and not c.is_ring), key=lambda c: c.key)
    ends = []  # (circuit, end, cell, facility)
    for c in circuits:
        facs = c.endpoint_facilities
        for end, cell in enumerate(c.endpoints):
            fac = facs[end] if facs else None
            if fac is None and footprints is not None:
                fac = footprints.query(*unsnap(cell))
            ends.append((c, end, cell, fac))

    # ad-hoc clusters for endpoints outside every footprint
    loose = sorted({cell for (_c, _e, cell, fac) in ends if fac is None})
    cluster_of = {}
    if loose:
        pts = np.array([unsnap(cell) for cell in loose])
        uf = UnionFind(range(len(loose)))
        for i, j in sorted(cKDTree(pts).query_pairs(cluster_deg * (1 + 1e-9))):
            uf.union(i, j)
        for root, members in uf.groups().items():
            name = "adhoc:%d,%d" % loose[root]
            for m in members:
                cluster_of[loose[m]] = name

    clusters = {}
    for c, end, cell, fac in ends:
        name = f"fac:{fac}" if fac is not None else cluster_of[cell]
        info = clusters.setdefault(name, {"facility": fac, "cells": [], "volts": []})
        info["cells"].append(cell)
        info["volts"].append(c.voltage_kv)

    out = BusSet()
    level_bus = {}  # (cluster, voltage) -> bus id
    next_id = 1
    for name in sorted(clusters):
        info = clusters[name]
        fac = info["facility"]
        if fac is not None and footprints is not None:
            coord = footprints.by_id[fac].centroid
        else:
            pts = np.array([unsnap(cell) for cell in info["cells"]])
            coord = (float(pts[:, 0].mean()), float(pts[:, 1].mean()))
        for group in split_voltage_levels(info["volts"], split_ratio):
            bus = Bus(id=next_id, coord=coord, base_kv=group[0], facility_id=fac, cluster=name)
            out.buses.append(bus)
            for v in group:
                level_bus[(name, v)] = next_id
            next_id += 1

    for c, end, cell, fac in ends:
        name = f"fac:{fac}" if fac is not None else cluster_of[cell]
        out.endpoint_bus[(c.key, end)] = level_bus[(name, c.voltage_kv)]
    return out


def build_line_branches(circuits, busset, start_id=1):
    """One AC branch per inter-facility circuit."""
    branches = []
    bid = start_id
    for c in sorted(circuits, key=lambda c: c.key):
        if c.is_hvdc or c.classification != "inter_facility":
            continue
        f = busset.endpoint_bus[(c.key, 0)]
        t = busset.endpoint_bus[(c.key, 1)]
        if f == t:
            continue
        branches.append(
            Branch(
                id=bid,
                from_bus=f,
                to_bus=t,
                kind="ac_line",
                voltage_kv=c.voltage_kv,
                length_km=c.length_km,
                is_underground=c.is_underground,
                circuit_key=c.key,
            )
        )
        bid += 1
    return branches


def needs_transformer(v1, v2, min_diff=XFMR_MIN_DIFF_KV, min_ratio=XFMR_MIN_RATIO):
    hv, lv = max(v1, v2), min(v1, v2)
    return hv - lv > min_diff and hv / lv > min_ratio


def infer_transformers(buses, branches=(), start_id=None):
    """Transformers between voltage levels that share a spatial cluster.

    A pair qualifies only when both the absolute (> 10 kV) and ratio
    (> 1.2) thresholds are exceeded.  Afterwards any AC line whose end
    buses differ by more than 10 % in base voltage is converted into a
    transformer.  Returns ``(transformers, branches)`` where ``branches``
    is the updated copy of the input branch list.
    """
    by_cluster = {}
    for b in sorted(buses, key=lambda b: b.id):
        by_cluster.setdefault(b.cluster, []).append(b)
    next_id = start_id if start_id is not None else max((br.id for br in branches), default=0) + 1

    transformers = []
    for name in sorted(by_cluster, key=str):
        members = sorted(by_cluster[name], key=lambda b: -b.base_kv)
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                hv, lv = members[i], members[j]
                if needs_transformer(hv.base_kv, lv.base_kv):
                    transformers.append(
                        Branch(
                            id=next_id,
                            from_bus=hv.id,
                            to_bus=lv.id,
                            kind="transformer",
                            voltage_kv=(hv.base_kv, lv.base_kv),
                        )
                    )
                    next_id += 1

    bus_kv = {b.id: b.base_kv for b in buses}
    updated = []
    for br in branches:
        if br.kind == "ac_line":
            v1, v2 = bus_kv[br.from_bus], bus_kv[br.to_bus]
            if max(v1, v2) / min(v1, v2) > CATCHALL_RATIO:
                f, t = (br.from_bus, br.to_bus) if v1 >= v2 else (br.to_bus, br.from_bus)
                br = Branch(
                    id=br.id,
                    from_bus=f,
                    to_bus=t,
                    kind="transformer",
                    voltage_kv=(max(v1, v2), min(v1, v2)),
                    length_km=br.length_km,
                    circuit_key=br.circuit_key,
                )
        updated.append(br)
    return transformers, updated
