"""Small geodesy helpers shared by the topology and demand stages.

Coordinates are (lon, lat) in WGS84 degrees throughout.
"""

import math

import numpy as np

EARTH_RADIUS_KM = 6371.0088
GRID_SCALE = 1_000_000  # 1e-6 degree snapping grid


def haversine_m(lon1, lat1, lon2, lat2):
    """Great-circle distance in metres. Works on scalars or numpy arrays."""
    lon1, lat1, lon2, lat2 = (np.radians(v) for v in (lon1, lat1, lon2, lat2))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    d = 2.0 * EARTH_RADIUS_KM * 1000.0 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    if np.ndim(d) == 0:
        return float(d)
    return d


def path_length_km(path):
    if len(path) < 2:
        return 0.0
    arr = np.asarray(path, dtype=float)
    seg = haversine_m(arr[:-1, 0], arr[:-1, 1], arr[1:, 0], arr[1:, 1])
    return float(np.sum(seg)) / 1000.0


def _round_half_away(value):
    scaled = value * GRID_SCALE
    r = math.floor(abs(scaled) + 0.5)
    return int(r) if scaled >= 0 else -int(r)


def snap(lon, lat):
    """Snap a coordinate onto the integer 1e-6 degree grid.

    Rounds half away from zero so keys are identical on every platform.
    Returns ``(gx, gy)``.
    """
    return (_round_half_away(lon), _round_half_away(lat))


def unsnap(key):
    return (key[0] / GRID_SCALE, key[1] / GRID_SCALE)


def point_buffer_deg(lat, metres=100.0):
    """Half-axes (dlon, dlat) in degrees of a ~``metres`` buffer at ``lat``.

    100 m maps to 0.0009 degrees of latitude; longitude is stretched by
    1/cos(lat).
    """
    dlat = 0.0009 * metres / 100.0
    dlon = dlat / max(math.cos(math.radians(lat)), 1e-6)
    return dlon, dlat
