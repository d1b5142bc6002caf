"""Spatial assessment of extracted trajectories.

Per trajectory: message count, convex hull area of the projected positions,
average complexity (mean cosine between consecutive displacement vectors) and
the average absolute change of course derived from it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateTrajectory
from .geo import project
from .splitter import TargetShip, Trajectory

MIN_MSGS_COURSE = 3


class AssessmentReport(NamedTuple):
    n_msg: int
    hull_area: float                      # m^2
    avg_complexity: float | None          # in [-1, 1]
    avg_abs_course_change: float | None   # deg in [0, 180]


# -- convex hull --------------------------------------------------------------------

def _cross(o, a, b):
    return (a[..., 0] - o[0]) * (b[..., 1] - o[1]) - (a[..., 1] - o[1]) * (b[..., 0] - o[0])


def quickhull(points) -> np.ndarray:
    """Convex hull vertices (collinear points excluded) in traversal order."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        return pts
    a = pts[0]   # lexicographic min
    b = pts[-1]  # lexicographic max
    side = _cross(a, b, pts)
    hull = [a]
    # explicit stack instead of recursion: (subset, p, q) to the left of p->q
    for subset, p, q in ((pts[side > 0], a, b), (pts[side < 0], b, a)):
        chain = []
        stack = [(subset, p, q, False)]
        while stack:
            s, p0, q0, emit = stack.pop()
            if emit:
                chain.append(s)
                continue
            if len(s) == 0:
                continue
            d = _cross(p0, q0, s)
            c = s[int(np.argmax(d))]
            left_pc = s[_cross(p0, c, s) > 0]
            left_cq = s[_cross(c, q0, s) > 0]
            # processed in order: left of p->c, then c, then left of c->q
            stack.append((left_cq, c, q0, False))
            stack.append((c, None, None, True))
            stack.append((left_pc, p0, c, False))
        hull.extend(chain)
        hull.append(q)
    hull.pop()  # closing point repeats a
    return np.asarray(hull)


def shoelace(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))) / 2.0


def polygon_hull_area(points) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        return 0.0
    pts = pts - pts.mean(axis=0)  # keeps cross products well conditioned
    return shoelace(quickhull(pts))


def projected_positions(traj: Trajectory, datum: str = "sphere") -> np.ndarray:
    a = traj.arrays
    e, n, _ = project(a["lat"], a["lon"], datum=datum)
    return np.column_stack((e, n))


def hull_area(traj: Trajectory, datum: str = "sphere") -> float:
    """Area in square meters of the convex hull of the UTM-projected positions."""
    if len(traj) < 3:
        return 0.0
    return polygon_hull_area(projected_positions(traj, datum))


# -- course statistics ----------------------------------------------------------------

def avg_complexity(traj: Trajectory, projected: bool = False) -> float:
    """Mean cosine of the angle between consecutive displacement vectors.

    Vectors are raw (lat, lon) degree differences, or UTM meters with
    ``projected``.  Consecutive repeated positions are collapsed first so no
    zero-length vector enters the mean.
    """
    if len(traj) < MIN_MSGS_COURSE:
        raise DegenerateTrajectory(f"need at least {MIN_MSGS_COURSE} messages, got {len(traj)}")
    if projected:
        pts = projected_positions(traj)
    else:
        a = traj.arrays
        pts = np.column_stack((a["lat"], a["lon"]))
    vec = np.diff(pts, axis=0)
    norm = np.hypot(vec[:, 0], vec[:, 1])
    vec = vec[norm > 0]
    if len(vec) < 2:
        raise DegenerateTrajectory("fewer than two non-zero displacements")
    a, b = vec[:-1], vec[1:]
    dot = np.einsum("ij,ij->i", a, b)
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    # cos of the turn angle; exact at 0 and 180 degrees, unlike dot / norms
    cos = np.cos(np.arctan2(cross, dot))
    return float(np.clip(cos.mean(), -1.0, 1.0))


def course_change_from_complexity(c):
    """arccos(c) in degrees; ``c`` is clipped into [-1, 1]."""
    out = np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))
    return float(out) if np.ndim(out) == 0 else out


def avg_abs_course_change(traj: Trajectory, projected: bool = False) -> float:
    return course_change_from_complexity(avg_complexity(traj, projected))


def assess(traj: Trajectory, projected: bool = False) -> AssessmentReport:
    try:
        c = avg_complexity(traj, projected)
        delta = course_change_from_complexity(c)
    except DegenerateTrajectory:
        c = delta = None
    return AssessmentReport(len(traj), hull_area(traj), c, delta)


# -- rules ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    """Named predicate; returning True rejects the trajectory."""

    name: str
    reject: Callable[[Trajectory], bool]

    def __call__(self, traj: Trajectory) -> bool:
        return bool(self.reject(traj))


Recipe = Sequence[Rule]


def too_few_obs(n: int) -> Rule:
    return Rule(f"too_few_obs(n={n})", lambda t: len(t) < n)


def convex_hull_area(area: float) -> Rule:
    return Rule(f"convex_hull_area(area={area:g})", lambda t: hull_area(t) < area)


def inspect(ships: Mapping[int, TargetShip], recipe: Recipe
            ) -> tuple[dict[int, TargetShip], dict[int, TargetShip]]:
    """Partition every ship's trajectories into accepted and rejected ones.

    Ships appear in a result map only when they have trajectories there.
    """
    accepted: dict[int, TargetShip] = {}
    rejected: dict[int, TargetShip] = {}
    for mmsi, ship in ships.items():
        good, bad = [], []
        for t in ship.trajectories:
            (bad if any(rule(t) for rule in recipe) else good).append(t)
        if good:
            accepted[mmsi] = replace(ship, trajectories=good)
        if bad:
            rejected[mmsi] = replace(ship, trajectories=bad)
    return accepted, rejected


# -- ship types -----------------------------------------------------------------------

def base_type(code: int | None) -> str:
    """Coarse ship category of an ITU ship type code."""
    if code is None or code == 0:
        return "NOTAVAILABLE"
    if 20 <= code <= 29:
        return "WIG"
    if code == 30:
        return "FISHING"
    if code in (31, 32, 52):
        return "TUGTOW"
    if code == 35:
        return "MILITARY"
    if code == 36:
        return "SAILING"
    if code == 37:
        return "PLEASURE"
    if 40 <= code <= 49:
        return "HSC"
    if 60 <= code <= 69:
        return "PASSENGER"
    if 70 <= code <= 79:
        return "CARGO"
    if 80 <= code <= 89:
        return "TANKER"
    return "OTHER"


def ship_type_hull_average(ships: Mapping[int, TargetShip]) -> dict[str, float]:
    sums: dict[str, list] = {}
    for ship in ships.values():
        key = base_type(ship.ship_type)
        for t in ship.trajectories:
            acc = sums.setdefault(key, [0.0, 0])
            acc[0] += hull_area(t)
            acc[1] += 1
    return {k: v[0] / v[1] for k, v in sorted(sums.items())}


# -- pixel map ------------------------------------------------------------------------

@dataclass
class PixelMap:
    """Mean course change per (n_msg, hull area) cell; NaN marks empty cells.

    Rows index the message count axis, columns the hull area axis.
    """

    values: np.ndarray
    counts: np.ndarray
    n_msg_range: tuple[float, float]
    area_range: tuple[float, float]

    def manifest(self) -> dict:
        return {
            "rows": {"quantity": "n_msg", "min": self.n_msg_range[0], "max": self.n_msg_range[1],
                     "cells": int(self.values.shape[0])},
            "cols": {"quantity": "hull_area_m2", "min": self.area_range[0], "max": self.area_range[1],
                     "cells": int(self.values.shape[1])},
            "value": "mean_abs_course_change_deg",
        }


def bin_index(x, lo: float, hi: float, n: int):
    """Cell of ``x`` in ``n`` half-open cells over [lo, hi], the last one closed.

    Values outside [lo, hi] give -1.
    """
    x = np.asarray(x, dtype=float)
    inside = (x >= lo) & (x <= hi)
    idx = np.floor((np.where(inside, x, lo) - lo) / (hi - lo) * n).astype(int)
    idx = np.minimum(idx, n - 1)  # x == hi and rounding just below hi
    return np.where(inside, idx, -1)


def pixel_map(trajs: Iterable[Trajectory], n_msg_max: float = 100, area_max: float = 5e4,
              resolution: tuple[int, int] = (100, 100), reports: Sequence[AssessmentReport] | None = None
              ) -> PixelMap:
    trajs = list(trajs)
    if reports is None:
        reports = [assess(t) for t in trajs]
    rows, cols = resolution
    sums = np.zeros((rows, cols))
    counts = np.zeros((rows, cols), dtype=int)
    for r in reports:
        if r.avg_abs_course_change is None:
            continue
        i = int(bin_index(r.n_msg, 0.0, n_msg_max, rows))
        j = int(bin_index(r.hull_area, 0.0, area_max, cols))
        if i < 0 or j < 0:
            continue
        sums[i, j] += r.avg_abs_course_change
        counts[i, j] += 1
    with np.errstate(invalid="ignore"):
        values = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return PixelMap(values, counts, (0.0, float(n_msg_max)), (0.0, float(area_max)))


def all_trajectories(ships: Mapping[int, TargetShip]) -> list[Trajectory]:
    return [t for mmsi in sorted(ships) for t in ships[mmsi].trajectories]

