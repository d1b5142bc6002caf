"""Inter-message metrics for consecutive pairs of one vessel stream.

Scalar helpers work on two messages; :func:`stream_metrics` computes all five
metrics for every consecutive pair of a stream with numpy.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ZeroTimeGap
from .geo import METERS_PER_NM, haversine

MS_TO_KNOTS = 3600.0 / METERS_PER_NM


class PairMetrics(NamedTuple):
    dt: float         # s
    dsog: float       # kn, signed
    rot: float        # deg/s, signed
    dist: float       # nm
    speed_gap: float  # kn, avg_sog - est_sog


def course_difference(c1, c2, wrap: bool = True):
    """Signed change of course from ``c1`` to ``c2`` in degrees.

    With ``wrap`` the smallest angle in (-180, 180] is returned, otherwise the
    plain difference.
    """
    d = np.asarray(c2, dtype=float) - c1
    if wrap:
        d = np.mod(d, 360.0)
        d = np.where(d > 180.0, d - 360.0, d)
    return float(d) if np.ndim(d) == 0 else d


def _dt(m1, m2) -> float:
    dt = m2.recv_time - m1.recv_time
    if dt == 0:
        raise ZeroTimeGap(f"messages of MMSI {m1.mmsi} share timestamp {m1.recv_time}")
    return dt


def avg_sog(m1, m2) -> float:
    return (m1.sog + m2.sog) / 2.0


def est_sog(m1, m2) -> float:
    """Speed in knots implied by the positions and the time gap."""
    dt = _dt(m1, m2)
    return haversine(m1.lat, m1.lon, m2.lat, m2.lon) / abs(dt) * MS_TO_KNOTS


def turning_rate(m1, m2, wrap: bool = True) -> float:
    """Signed change of course per second; NaN when a course is unavailable."""
    dt = _dt(m1, m2)
    if m1.cog is None or m2.cog is None:
        return float("nan")
    return course_difference(m1.cog, m2.cog, wrap) / dt


def pair_metrics(m1, m2, wrap: bool = True) -> PairMetrics:
    dt = _dt(m1, m2)
    dist_m = haversine(m1.lat, m1.lon, m2.lat, m2.lon)
    est = dist_m / abs(dt) * MS_TO_KNOTS
    return PairMetrics(
        dt=dt,
        dsog=m2.sog - m1.sog,
        rot=turning_rate(m1, m2, wrap),
        dist=dist_m / METERS_PER_NM,
        speed_gap=avg_sog(m1, m2) - est,
    )


def stream_metrics(t, lat, lon, sog, cog, wrap: bool = True) -> dict[str, np.ndarray]:
    """Metrics of every consecutive pair ``(i, i+1)`` as arrays of length n-1.

    Pairs with ``dt == 0`` get NaN for rot and speed_gap (their ``dt`` entry
    stays 0 so callers can treat them separately).  Unavailable courses give
    NaN rot.
    """
    t = np.asarray(t, dtype=float)
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    sog = np.asarray(sog, dtype=float)
    cog = np.asarray(cog, dtype=float)
    dt = np.diff(t)
    dist_m = haversine(lat[:-1], lon[:-1], lat[1:], lon[1:])
    dist_m = np.atleast_1d(np.asarray(dist_m, dtype=float))
    zero = dt == 0
    safe_dt = np.where(zero, 1.0, dt)
    est = np.where(zero, np.nan, dist_m / np.abs(safe_dt) * MS_TO_KNOTS)
    rot = np.where(zero, np.nan, course_difference(cog[:-1], cog[1:], wrap) / safe_dt)
    return {
        "dt": dt,
        "dsog": np.diff(sog),
        "rot": np.atleast_1d(rot),
        "dist": dist_m / METERS_PER_NM,
        "speed_gap": (sog[:-1] + sog[1:]) / 2.0 - est,
    }
