"""Facility footprints and the snapped endpoint index."""

from __future__ import annotations

from collections import defaultdict

from shapely import STRtree
from shapely.affinity import scale
from shapely.geometry import Point

from ..geo import point_buffer_deg, snap

POLYGON_BUFFER_DEG = 0.0006  # ~66 m
POINT_BUFFER_M = 100.0


class FacilityIndex:
    """Spatial index of buffered facility areas."""

    def __init__(self, facilities, polygon_buffer=POLYGON_BUFFER_DEG, point_buffer_m=POINT_BUFFER_M):
        self.facilities = sorted(facilities, key=lambda f: f.id)
        self.by_id = {f.id: f for f in self.facilities}
        self.footprints = []
        for f in self.facilities:
            if f.is_point:
                dlon, dlat = point_buffer_deg(f.geometry.y, point_buffer_m)
                fp = scale(Point(f.geometry.x, f.geometry.y).buffer(1.0, quad_segs=16), dlon, dlat)
            else:
                fp = f.geometry.buffer(polygon_buffer)
            self.footprints.append(fp)
        self._tree = STRtree(self.footprints) if self.footprints else None

    def __len__(self):
        return len(self.facilities)

    def query(self, lon, lat, kinds=None):
        """Id of the facility whose buffered footprint contains the point, or None.

        When footprints overlap, the facility whose raw geometry is closest
        wins; ties go to the lower id.
        """
        if self._tree is None:
            return None
        p = Point(lon, lat)
        best = None
        for i in self._tree.query(p, predicate="intersects"):
            f = self.facilities[int(i)]
            if kinds is not None and f.kind not in kinds:
                continue
            cand = (f.geometry.distance(p), f.id)
            if best is None or cand < best:
                best = cand
        return None if best is None else best[1]

    def voltages(self, facility_id):
        f = self.by_id.get(facility_id)
        return f.voltages_kv if f is not None else ()


def build_facility_footprints(facilities, polygon_buffer=POLYGON_BUFFER_DEG, point_buffer_m=POINT_BUFFER_M):
    return FacilityIndex(facilities, polygon_buffer, point_buffer_m)


class EndpointIndex:
    """Hash index from snapped grid cells to the section ends located there."""

    def __init__(self):
        self.cells = defaultdict(list)  # key -> [(section_id, end)]
        self.facility = {}  # key -> facility id or None

    def __getitem__(self, key):
        return self.cells.get(key, [])

    def __contains__(self, key):
        return key in self.cells

    def __iter__(self):
        return iter(self.cells)

    def __len__(self):
        return len(self.cells)

    def facility_at(self, key):
        return self.facility.get(key)


def build_endpoint_index(sections, footprints=None):
    """Snap every section endpoint and annotate it with its facility."""
    index = EndpointIndex()
    for s in sorted(sections, key=lambda s: s.id):
        for end, (lon, lat) in enumerate(s.endpoints):
            key = snap(lon, lat)
            index.cells[key].append((s.id, end))
            if key not in index.facility:
                index.facility[key] = footprints.query(lon, lat) if footprints is not None else None
    return index
