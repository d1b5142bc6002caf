import json

import pytest

from aistrex.decoder import make_message
from aistrex.filters import (
    OUT_OF_BOUNDS,
    POSITION_UNAVAILABLE,
    REASONS,
    SOG_TOO_HIGH,
    SOG_TOO_LOW,
    SOG_UNAVAILABLE,
    apply_preprocessor,
    drop_report,
    filter_messages,
    only_types,
    reconciles,
)


def _m(sog, lat=55.0, lon=10.0, t=0.0, msg_type=1):
    return make_message(t, 211000000, lat, lon, sog, 90.0, msg_type)


def test_unavailable_speed_dropped():
    kept, stats = filter_messages([_m(102.3)])
    assert kept == [] and stats[SOG_UNAVAILABLE] == 1


def test_slow_message_dropped():
    kept, stats = filter_messages([_m(0.5)])
    assert kept == [] and stats[SOG_TOO_LOW] == 1


def test_inside_bounds_kept():
    m = _m(15.0)
    assert filter_messages([m])[0] == [m]


def test_speed_interval_closed():
    msgs = [_m(1.0), _m(30.0), _m(30.1)]
    kept, stats = filter_messages(msgs)
    assert kept == msgs[:2] and stats[SOG_TOO_HIGH] == 1


def test_every_reason_reported_and_reconciled():
    msgs = [_m(5.0, lat=None), _m(5.0, lat=40.0), _m(None), _m(0.0), _m(31.0), _m(5.0)]
    kept, stats = filter_messages(msgs)
    assert set(stats) == set(REASONS)
    assert stats[POSITION_UNAVAILABLE] == stats[OUT_OF_BOUNDS] == 1
    assert reconciles(stats, len(msgs), len(kept))
    report = json.loads(drop_report(stats, len(msgs), len(kept)))
    assert report["input"] == 6 and report["kept"] == 1


def test_bad_speed_interval():
    with pytest.raises(ValueError):
        filter_messages([], sog_min=5, sog_max=5)


def test_preprocessor_identity_and_empty():
    msgs = [_m(5.0, t=i) for i in range(4)]
    assert apply_preprocessor(msgs, lambda m: True) == msgs
    assert apply_preprocessor(msgs, lambda m: False) == []


def test_preprocessor_type_selection_keeps_order():
    msgs = [_m(5.0, t=i, msg_type=18 if i % 2 else 1) for i in range(6)]
    got = apply_preprocessor(msgs, only_types([18]))
    assert got == [msgs[1], msgs[3], msgs[5]]
