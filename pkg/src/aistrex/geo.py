"""Great-circle distance, bounding boxes and UTM projection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import PolarRegion

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_NM = 1852.0

UTM_K0 = 0.9996
UTM_FALSE_EASTING = 500_000.0
UTM_FALSE_NORTHING_SOUTH = 10_000_000.0
UTM_MAX_ABS_LAT = 84.0

# WGS84
WGS84_A = 6_378_137.0
WGS84_F = 1 / 298.257223563


def haversine(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters on a sphere of radius 6371 km.

    Inputs are degrees and may be scalars or broadcastable arrays.
    """
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(np.asarray(lon2, dtype=float) - lon1)
    a = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    d = 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    return float(d) if np.ndim(d) == 0 else d


def distance(m1, m2) -> float:
    """Haversine distance in meters between two objects with ``lat``/``lon``."""
    return haversine(m1.lat, m1.lon, m2.lat, m2.lon)


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError(f"degenerate bounding box {self}")

    def contains(self, lat, lon) -> bool:
        if lat is None or lon is None:
            return False
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max

    def as_dict(self) -> dict:
        return {"lat_min": self.lat_min, "lat_max": self.lat_max,
                "lon_min": self.lon_min, "lon_max": self.lon_max}


# North Sea / western Baltic study area
STUDY_AREA = BoundingBox(lat_min=51.85, lat_max=60.49, lon_min=4.85, lon_max=14.3)


def in_bounds(msg, bb: BoundingBox) -> bool:
    return bb.contains(msg.lat, msg.lon)


# -- UTM -----------------------------------------------------------------------

class UtmZone(NamedTuple):
    number: int
    north: bool

    def __str__(self) -> str:
        return f"{self.number}{'N' if self.north else 'S'}"

    @property
    def central_meridian(self) -> float:
        return (self.number - 1) * 6 - 180 + 3


class PlanePoint(NamedTuple):
    easting: float
    northing: float
    zone: UtmZone


def utm_zone(lat: float, lon: float) -> UtmZone:
    """Standard UTM zone, including the Norway and Svalbard exceptions."""
    if not abs(lat) < UTM_MAX_ABS_LAT:
        raise PolarRegion(f"latitude {lat} is outside the UTM band")
    lon = ((lon + 180.0) % 360.0) - 180.0
    number = int((lon + 180.0) // 6) + 1
    if number > 60:
        number = 60
    if 56.0 <= lat < 64.0 and 3.0 <= lon < 12.0:
        number = 32
    elif 72.0 <= lat < 84.0 and lon >= 0.0:
        if lon < 9.0:
            number = 31
        elif lon < 21.0:
            number = 33
        elif lon < 33.0:
            number = 35
        elif lon < 42.0:
            number = 37
    return UtmZone(number, lat >= 0.0)


def _tm_sphere(phi, dlmb):
    b = np.cos(phi) * np.sin(dlmb)
    x = UTM_K0 * EARTH_RADIUS_M * np.arctanh(b)
    y = UTM_K0 * EARTH_RADIUS_M * np.arctan2(np.tan(phi), np.cos(dlmb))
    return x, y


def _tm_wgs84(phi, dlmb):
    # Krueger series to fourth order in the third flattening
    f = WGS84_F
    n = f / (2 - f)
    big_a = WGS84_A / (1 + n) * (1 + n ** 2 / 4 + n ** 4 / 64)
    alpha = (
        n / 2 - 2 * n ** 2 / 3 + 5 * n ** 3 / 16 + 41 * n ** 4 / 180,
        13 * n ** 2 / 48 - 3 * n ** 3 / 5 + 557 * n ** 4 / 1440,
        61 * n ** 3 / 240 - 103 * n ** 4 / 140,
        49561 * n ** 4 / 161280,
    )
    e = math.sqrt(f * (2 - f))
    t = np.sinh(np.arctanh(np.sin(phi)) - e * np.arctanh(e * np.sin(phi)))
    xi = np.arctan2(t, np.cos(dlmb))
    eta = np.arctanh(np.sin(dlmb) / np.sqrt(1 + t ** 2))
    x_sum = eta.copy() if isinstance(eta, np.ndarray) else eta
    y_sum = xi.copy() if isinstance(xi, np.ndarray) else xi
    for j, a_j in enumerate(alpha, start=1):
        x_sum = x_sum + a_j * np.cos(2 * j * xi) * np.sinh(2 * j * eta)
        y_sum = y_sum + a_j * np.sin(2 * j * xi) * np.cosh(2 * j * eta)
    return UTM_K0 * big_a * x_sum, UTM_K0 * big_a * y_sum


def project(lats, lons, zone: UtmZone | None = None, datum: str = "sphere"):
    """Project degree arrays into one UTM zone.

    The zone defaults to the zone of the first point and is used for every
    point, so a whole trajectory lives on a single chart.  ``datum="sphere"``
    uses the 6371 km sphere of :func:`haversine`; ``"wgs84"`` the ellipsoid.

    Returns ``(eastings, northings, zone)``.
    """
    lats = np.atleast_1d(np.asarray(lats, dtype=float))
    lons = np.atleast_1d(np.asarray(lons, dtype=float))
    if lats.size == 0:
        raise ValueError("nothing to project")
    if np.any(np.abs(lats) >= UTM_MAX_ABS_LAT):
        raise PolarRegion("UTM is undefined beyond 84 degrees latitude")
    if zone is None:
        zone = utm_zone(float(lats[0]), float(lons[0]))
    phi = np.radians(lats)
    dlmb = np.radians(((lons - zone.central_meridian + 180.0) % 360.0) - 180.0)
    if datum == "sphere":
        x, y = _tm_sphere(phi, dlmb)
    elif datum == "wgs84":
        x, y = _tm_wgs84(phi, dlmb)
    else:
        raise ValueError(f"unknown datum {datum!r}")
    northing = y + (0.0 if zone.north else UTM_FALSE_NORTHING_SOUTH)
    return x + UTM_FALSE_EASTING, northing, zone


def to_utm(lat: float, lon: float, zone: UtmZone | None = None,
           datum: str = "sphere") -> PlanePoint:
    e, n, z = project([lat], [lon], zone=zone, datum=datum)
    return PlanePoint(float(e[0]), float(n[0]), z)
