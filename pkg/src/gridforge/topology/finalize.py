"""Validation and final assembly of the bus-branch model."""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .model import Branch, NetworkModel

EHV_BRIDGE_KV = 345.0


class ModelError(RuntimeError):
    pass


def components(bus_ids, branches):
    """Map bus id -> component label, labels numbered by smallest member."""
    ids = sorted(bus_ids)
    pos = {b: i for i, b in enumerate(ids)}
    rows = [pos[br.from_bus] for br in branches if br.from_bus in pos and br.to_bus in pos]
    cols = [pos[br.to_bus] for br in branches if br.from_bus in pos and br.to_bus in pos]
    n = len(ids)
    if n == 0:
        return {}
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    return {b: int(labels[pos[b]]) for b in ids}


def add_bridges(buses, branches, next_id):
    """Bridge transformers between disconnected voltage levels of one facility."""
    bridges = []
    comp = components([b.id for b in buses], branches)
    by_cluster = {}
    for b in sorted(buses, key=lambda b: b.id):
        by_cluster.setdefault(b.cluster, []).append(b)
    for name in sorted(by_cluster, key=str):
        members = sorted(by_cluster[name], key=lambda b: -b.base_kv)
        for hv, lv in zip(members, members[1:]):
            if comp[hv.id] == comp[lv.id]:
                continue
            units = 2 if hv.base_kv >= EHV_BRIDGE_KV else 1
            for _ in range(units):
                bridges.append(
                    Branch(id=next_id, from_bus=hv.id, to_bus=lv.id, kind="bridge", voltage_kv=(hv.base_kv, lv.base_kv))
                )
                next_id += 1
            old, new = comp[lv.id], comp[hv.id]
            for k, v in comp.items():
                if v == old:
                    comp[k] = new
    return bridges


def finalize_network(buses, branches, generators, dclinks=(), multi_state=False):
    """Bridge, prune and extract the largest generator-bearing component.

    Returns ``(NetworkModel, stats)``; raises ModelError if nothing usable
    remains.
    """
    stats = {"buses_in": len(buses), "branches_in": len(branches), "generators_in": len(generators)}
    branches = list(branches)
    next_id = max((br.id for br in branches), default=0) + 1
    bridges = add_bridges(buses, branches, next_id)
    branches.extend(bridges)
    stats["bridges_added"] = len(bridges)

    deg = {b.id: 0 for b in buses}
    for br in branches:
        deg[br.from_bus] += 1
        deg[br.to_bus] += 1
    kept = [b for b in buses if deg[b.id] > 0]
    stats["isolated_removed"] = len(buses) - len(kept)

    comp = components([b.id for b in kept], branches)
    gen_comps = {comp[g.bus] for g in generators if g.bus in comp}
    before = len(kept)
    kept = [b for b in kept if comp[b.id] in gen_comps]
    stats["generator_free_removed"] = before - len(kept)
    if not kept:
        raise ModelError("no connected component contains a generator")

    sizes = {}
    for b in kept:
        sizes[comp[b.id]] = sizes.get(comp[b.id], 0) + 1
    largest = max(sizes, key=lambda c: (sizes[c], -c))
    stats["components"] = len(sizes)
    before = len(kept)
    kept = [b for b in kept if comp[b.id] == largest]
    stats["minor_components_removed"] = before - len(kept)

    keep_ids = {b.id for b in kept}
    branches = [br for br in branches if br.from_bus in keep_ids and br.to_bus in keep_ids]
    gens = [g for g in generators if g.bus in keep_ids]
    links = [d for d in dclinks if d.from_bus in keep_ids and d.to_bus in keep_ids]
    if not gens:
        raise ModelError("largest component has no generators")

    for b in kept:
        b.is_slack = False
    slack_gen = max(gens, key=lambda g: (g.p_max_mw, -g.id))
    next(b for b in kept if b.id == slack_gen.bus).is_slack = True

    stats.update(
        buses=len(kept),
        branches=len(branches),
        ac_lines=sum(1 for br in branches if br.kind == "ac_line"),
        transformers=sum(1 for br in branches if br.kind != "ac_line"),
        generators=len(gens),
        dclinks=len(links),
        slack_bus=slack_gen.bus,
    )
    model = NetworkModel(
        buses=sorted(kept, key=lambda b: b.id),
        branches=sorted(branches, key=lambda br: br.id),
        generators=sorted(gens, key=lambda g: g.id),
        dclinks=sorted(links, key=lambda d: d.id),
        multi_state=multi_state,
        stats={"finalize": stats},
    )
    return model, stats
