import math

import numpy as np
import pytest

import oracles
from aistrex.assess import (
    Rule,
    assess,
    avg_complexity,
    base_type,
    bin_index,
    convex_hull_area,
    course_change_from_complexity,
    hull_area,
    inspect,
    pixel_map,
    polygon_hull_area,
    quickhull,
    ship_type_hull_average,
    too_few_obs,
)
from aistrex.decoder import VesselStatic, make_message
from aistrex.errors import DegenerateTrajectory
from aistrex.geo import project
from aistrex.splitter import TargetShip, Trajectory
from aistrex.synthetic import destination


def _traj(points, mmsi=1):
    return Trajectory(mmsi, [make_message(10.0 * i, mmsi, la, lo, 5.0, 0.0) for i, (la, lo) in enumerate(points)])


def _square_traj(side_m, n_side=5, mmsi=1):
    """Trajectory whose projected positions trace an axis-aligned square."""
    e0, n0, zone = project([55.0], [9.0])
    pts = []
    for k in range(4 * n_side):
        edge, f = divmod(k, n_side)
        f /= n_side
        x, y = [(f, 0), (1, f), (1 - f, 1), (0, 1 - f)][edge]
        pts.append((e0[0] + x * side_m, n0[0] + y * side_m))
    # invert the spherical projection numerically via small Newton steps
    lats, lons = [], []
    for e, n in pts:
        la, lo = 55.0, 9.0
        for _ in range(20):
            ee, nn, _ = project([la], [lo], zone)
            la += (n - nn[0]) / 111_195.0
            lo += (e - ee[0]) / (111_195.0 * math.cos(math.radians(la)))
        lats.append(la)
        lons.append(lo)
    return _traj(list(zip(lats, lons)), mmsi)


def test_square_hull():
    square = [(0, 0), (1000, 0), (1000, 1000), (0, 1000), (500, 500)]
    assert polygon_hull_area(square) == pytest.approx(1.0e6, rel=1e-9)
    assert hull_area(_square_traj(1000.0)) == pytest.approx(1.0e6, rel=1e-6)


def test_collinear_hull_zero():
    assert polygon_hull_area([(0, 0), (1, 1), (2, 2)]) == 0.0
    assert hull_area(_traj([(55.0, 10.0), (55.1, 10.0)])) == 0.0


def test_hull_matches_brute_force():
    rng = np.random.default_rng(17)
    pts = rng.normal(size=(50, 2)) * 300.0
    assert polygon_hull_area(pts) == pytest.approx(oracles.brute_force_hull_area(pts), rel=1e-9)


def test_quickhull_vertices_on_grid():
    pts = [(x, y) for x in range(5) for y in range(5)]
    hull = quickhull(pts)
    assert {tuple(p) for p in hull} == {(0, 0), (4, 0), (4, 4), (0, 4)}


def test_complexity_laws():
    assert avg_complexity(_traj([(55.0 + 0.01 * i, 10.0) for i in range(6)])) == 1.0
    stairs = [(55.0, 10.0), (55.01, 10.0), (55.01, 10.01), (55.02, 10.01), (55.02, 10.02)]
    assert avg_complexity(_traj(stairs)) == pytest.approx(0.0, abs=1e-12)
    assert avg_complexity(_traj([(55.0, 10.0), (55.0, 10.01)] * 3)) == -1.0


def test_course_change_values():
    assert course_change_from_complexity(1.0) == 0.0
    assert course_change_from_complexity(-1.0) == 180.0
    assert course_change_from_complexity(0.0) == pytest.approx(90.0, abs=1e-12)


def test_complexity_needs_three_messages():
    with pytest.raises(DegenerateTrajectory):
        avg_complexity(_traj([(55.0, 10.0), (55.1, 10.0)]))
    with pytest.raises(DegenerateTrajectory):
        avg_complexity(_traj([(55.0, 10.0)] * 4))
    assert assess(_traj([(55.0, 10.0)] * 4)).avg_abs_course_change is None


def test_repeated_positions_are_skipped():
    a = avg_complexity(_traj([(55.0, 10.0), (55.01, 10.0), (55.01, 10.0), (55.02, 10.0)]))
    assert a == 1.0


def test_empty_recipe_accepts_everything():
    ships = {1: TargetShip(1, None, [_traj([(55.0, 10.0)] * 3)])}
    accepted, rejected = inspect(ships, [])
    assert accepted[1].trajectories == ships[1].trajectories and rejected == {}


def test_too_few_obs_rejects_49():
    t = _traj([(55.0 + 0.001 * i, 10.0) for i in range(49)])
    accepted, rejected = inspect({1: TargetShip(1, None, [t])}, [too_few_obs(50)])
    assert accepted == {} and rejected[1].trajectories == [t]


def test_hull_area_rule_accepts_large_hull():
    t = _square_traj(1000.0)
    accepted, _ = inspect({1: TargetShip(1, None, [t])}, [convex_hull_area(3e5)])
    assert accepted[1].trajectories == [t]


def test_custom_rule():
    rule = Rule("odd_mmsi", lambda t: t.mmsi % 2 == 1)
    ships = {1: TargetShip(1, None, [_traj([(55, 10)] * 2, 1)]), 2: TargetShip(2, None, [_traj([(55, 10)] * 2, 2)])}
    accepted, rejected = inspect(ships, [rule])
    assert list(accepted) == [2] and list(rejected) == [1]


def test_ship_type_hull_average():
    a = _traj([(55.0, 10.0), (55.0, 10.0 + 0.001), (55.0 + 0.001, 10.0)])
    b = _traj([(55.0, 10.0), (55.0, 10.0 + 0.002), (55.0 + 0.001, 10.0)])
    ships = {1: TargetShip(1, VesselStatic(1, 100.0, 71), [a, b])}
    avg = ship_type_hull_average(ships)
    assert list(avg) == ["CARGO"]
    assert avg["CARGO"] == pytest.approx((hull_area(a) + hull_area(b)) / 2)
    assert "TANKER" not in avg


def test_base_types():
    assert base_type(None) == "NOTAVAILABLE"
    assert base_type(74) == "CARGO" and base_type(84) == "TANKER"
    assert base_type(30) == "FISHING" and base_type(99) == "OTHER"


def test_bin_index_edges():
    assert bin_index([0.0, 0.99, 1.0, 100.0, 100.1, -1.0], 0.0, 100.0, 100).tolist() == [0, 0, 1, 99, -1, -1]


def _zigzag(n, amp_deg):
    pts = [(55.0, 10.0)]
    for i in range(n - 1):
        la, lo = destination(*pts[-1], 90.0 + (amp_deg if i % 2 else -amp_deg), 50.0)
        pts.append((la, lo))
    return _traj(pts)


def test_pixel_map_single_and_pair():
    t1 = _zigzag(10, 5.0)
    pm = pixel_map([t1], n_msg_max=100, area_max=5e4)
    assert int((pm.counts > 0).sum()) == 1
    i, j = np.argwhere(pm.counts > 0)[0]
    assert pm.values[i, j] == pytest.approx(assess(t1).avg_abs_course_change)

    r1 = assess(t1)._replace(avg_abs_course_change=10.0)
    r2 = r1._replace(avg_abs_course_change=20.0)
    pm2 = pixel_map([], reports=[r1, r2])
    assert np.nanmax(pm2.values) == 15.0 and pm2.counts.sum() == 2


def test_pixel_map_excludes_large_hull():
    big = _square_traj(1000.0)
    pm = pixel_map([big], area_max=5e4)
    assert pm.counts.sum() == 0 and np.all(np.isnan(pm.values))
