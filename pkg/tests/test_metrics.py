import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from aistrex.decoder import make_message
from aistrex.errors import ZeroTimeGap
from aistrex.ingest import message_arrays
from aistrex.metrics import avg_sog, course_difference, est_sog, pair_metrics, stream_metrics, turning_rate
from aistrex.synthetic import destination


def _m(t, lat=55.0, lon=10.0, sog=5.0, cog=90.0):
    return make_message(t, 211000000, lat, lon, sog, cog)


@pytest.mark.parametrize("a, b, expected", [(10, 20, 15), (7.5, 7.5, 7.5), (1.0, 30.0, 15.5)])
def test_avg_sog(a, b, expected):
    assert avg_sog(_m(0, sog=a), _m(1, sog=b)) == expected


def test_est_sog_definition_of_knot():
    lat, lon = destination(55.0, 10.0, 0.0, 1852.0)
    assert est_sog(_m(0), _m(3600, lat, lon)) == pytest.approx(1.0, rel=1e-12)


def test_est_sog_at_rest():
    assert est_sog(_m(0), _m(60)) == 0.0


def test_est_sog_hand_arithmetic():
    lat, lon = destination(55.0, 10.0, 45.0, 5556.0)
    assert est_sog(_m(0), _m(600, lat, lon)) == pytest.approx(5556 / 600 * 3600 / 1852, rel=1e-12)
    assert est_sog(_m(0), _m(600, lat, lon)) == pytest.approx(18.0, rel=1e-12)


def test_est_sog_zero_gap():
    with pytest.raises(ZeroTimeGap):
        est_sog(_m(5), _m(5))


def test_turning_rate_signed_and_wrapped():
    assert turning_rate(_m(0, cog=10), _m(20, cog=30)) == pytest.approx(1.0)
    assert turning_rate(_m(0, cog=10), _m(20, cog=350)) == pytest.approx(-1.0)
    assert turning_rate(_m(0, cog=10), _m(20, cog=10)) == 0.0


def test_turning_rate_without_wrap():
    assert turning_rate(_m(0, cog=10), _m(20, cog=350), wrap=False) == pytest.approx(17.0)


def test_course_difference_half_turn_is_positive():
    assert course_difference(0.0, 180.0) == 180.0
    assert course_difference(180.0, 0.0) == 180.0


@given(st.floats(0, 359.9), st.floats(0, 359.9))
def test_course_difference_range(a, b):
    d = course_difference(a, b)
    assert -180.0 < d <= 180.0
    assert (a + d - b) % 360.0 == pytest.approx(0.0, abs=1e-9) or \
        (a + d - b) % 360.0 == pytest.approx(360.0, abs=1e-9)


def test_pair_at_rest():
    pm = pair_metrics(_m(0, sog=3.0), _m(10, sog=3.0))
    assert pm == (10.0, 0.0, 0.0, 0.0, 3.0)


def test_pair_speed_gap_zero_when_consistent():
    lat, lon = destination(55.0, 10.0, 0.0, 1852.0)
    pm = pair_metrics(_m(0, sog=1.0, cog=0.0), _m(3600, lat, lon, sog=1.0, cog=0.0))
    assert pm.speed_gap == pytest.approx(0.0, abs=1e-12)
    assert pm.dist == pytest.approx(1.0, rel=1e-12)


def test_outlier_speed_gap():
    # a 10 s jump covering what 200 kn would cover
    meters = 200.0 * 1852.0 / 3600.0 * 10.0
    lat, lon = destination(55.0, 10.0, 90.0, meters)
    pm = pair_metrics(_m(0, sog=10.0), _m(10, lat, lon, sog=10.0))
    assert est_sog(_m(0), _m(10, lat, lon)) == pytest.approx(200.0, rel=1e-9)
    assert pm.speed_gap == pytest.approx(-190.0, rel=1e-9)


def test_stream_metrics_match_pairwise_oracle():
    rng = np.random.default_rng(3)
    msgs = [_m(0.0)]
    for i in range(30):
        p = msgs[-1]
        lat, lon = destination(p.lat, p.lon, rng.uniform(0, 360), rng.uniform(0, 500))
        msgs.append(_m(p.recv_time + rng.integers(1, 60), lat, lon, rng.uniform(1, 20), rng.uniform(0, 360)))
    a = message_arrays(msgs)
    pm = stream_metrics(a["t"], a["lat"], a["lon"], a["sog"], a["cog"])
    for i, (m1, m2) in enumerate(zip(msgs[:-1], msgs[1:])):
        ref = oracles.pair_metrics(m1, m2)
        for k in ("dt", "dsog", "rot", "dist", "speed_gap"):
            assert pm[k][i] == pytest.approx(ref[k], rel=1e-9, abs=1e-12)


def test_stream_metrics_zero_gap_and_missing_course():
    msgs = [_m(0), _m(0, cog=None), _m(10)]
    a = message_arrays(msgs)
    pm = stream_metrics(a["t"], a["lat"], a["lon"], a["sog"], a["cog"])
    assert pm["dt"][0] == 0 and math.isnan(pm["rot"][0]) and math.isnan(pm["speed_gap"][0])
    assert math.isnan(pm["rot"][1]) and pm["speed_gap"][1] == 5.0
