"""Circuit classification by endpoint connectivity."""

from __future__ import annotations

from collections import Counter, defaultdict

from ..geo import unsnap

CLASSES = ("inter_facility", "loop", "self_loop", "single_facility", "isolated", "tap")


def classify_circuits(groups, footprints):
    """Assign exactly one class to every merged group (mutates and returns them).

    Order of tests: self-loop, ring/same-facility loop, inter-facility,
    tap (a free end on another group's interior vertex or an unpaired end
    at a multi-way junction), single-facility, isolated.
    """
    interior = defaultdict(set)
    for g in groups:
        for cell in g.interior_cells:
            interior[cell].add(g.key)

    for g in groups:
        if len(set(g.section_ids)) != len(g.section_ids) or (
            len(g.section_ids) == 1 and not g.is_ring and g.endpoints[0] == g.endpoints[1]
        ):
            g.classification = "self_loop"
            g.endpoint_facilities = (None, None)
            continue
        if g.is_ring:
            g.classification = "loop"
            continue
        facs = tuple(footprints.query(*unsnap(cell)) if footprints is not None else None for cell in g.endpoints)
        g.endpoint_facilities = facs
        fa, fb = facs
        if fa is not None and fb is not None:
            g.classification = "inter_facility" if fa != fb else "loop"
            continue
        tapped = False
        for end, cell in enumerate(g.endpoints):
            if facs[end] is not None:
                continue
            if g.spur_ends[end] or (interior.get(cell, set()) - {g.key}):
                tapped = True
        if tapped:
            g.classification = "tap"
        elif fa is not None or fb is not None:
            g.classification = "single_facility"
        else:
            g.classification = "isolated"
    return groups


def classification_counts(groups):
    counts = Counter({c: 0 for c in CLASSES})
    counts.update(g.classification for g in groups)
    return dict(counts)
