from pathlib import Path

import pytest

import oracles
from aistrex.decoder import VesselStatic, make_message
from aistrex.ingest import MessageStream
from aistrex.quantiles import SplitThresholds, load_table
from aistrex.splitter import Trajectory, extract_all, find_split_points, rejoin, split
from aistrex.synthetic import destination

FIXTURES = Path(__file__).parent / "fixtures"
TH = SplitThresholds(s=4.7, r=(-1.067, 0.840), t=391.0, d=1.001, b=(-3.237, 4.022), alpha=0.05)


def _stream(n=30, sog=10.0, cog=45.0, cadence=10.0, mmsi=211000000, gaps=None):
    gaps = gaps or {}
    msgs, lat, lon, t = [], 55.0, 10.0, 0.0
    for i in range(n):
        msgs.append(make_message(t, mmsi, lat, lon, sog, cog))
        dt = gaps.get(i, cadence)
        lat, lon = destination(lat, lon, cog, sog * dt * 1852.0 / 3600.0)
        t += dt
    return MessageStream(mmsi, msgs)


def test_straight_stream_has_no_split():
    assert find_split_points(_stream(), TH) == []


def test_positional_jump_only_fires_distance():
    # 1800 s at 10 kn is a 5 nm jump with consistent speed; t is lifted so only dist can fire
    th = TH._replace(t=1e9)
    s = _stream(gaps={14: 1800.0})
    assert oracles.predicate_fires(s.messages[14], s.messages[15], th) == ["dist"]
    assert find_split_points(s, th) == [14]


def test_time_gap_above_t():
    s = _stream(gaps={7: 400.0})
    assert find_split_points(s, TH) == [7]


def test_zero_gap_always_splits():
    s = _stream()
    msgs = list(s.messages)
    msgs[5] = msgs[5]._replace(recv_time=msgs[4].recv_time)
    assert 4 in find_split_points(msgs, TH)


def test_no_split_points_one_trajectory():
    s = _stream()
    (t,) = split(s, TH)
    assert t.messages == s.messages


def test_isolated_message_dropped():
    s = _stream(gaps={9: 500.0, 10: 500.0})
    trajs = split(s, TH)
    assert len(trajs) == 2
    assert s.messages[10] not in [m for t in trajs for m in t.messages]


def test_empty_stream():
    assert split(MessageStream(1, []), TH) == []


def test_genuine_gap_not_rejoined():
    s = _stream(gaps={14: 10 * TH.t})
    trajs = split(s, TH)
    assert len(rejoin(trajs, TH)) == 2


def test_single_trajectory_unchanged():
    t = Trajectory(1, list(_stream().messages))
    assert rejoin([t], TH) == [t]


def test_skip_split_one_trajectory_each():
    streams = [_stream(mmsi=1, gaps={3: 900.0}), _stream(mmsi=2)]
    ships = extract_all(streams, {}, None, 0.05, skip_split=True)
    assert all(len(s.trajectories) == 1 for s in ships.values())
    assert ships[1].split_points == 0


def test_empty_streams_empty_map():
    table = load_table(FIXTURES / "reference_table.json")
    assert extract_all([], {}, table, 0.05) == {}


def test_alpha_never_increases_splits_when_shrinking(noisy_fleet):
    table = load_table(FIXTURES / "reference_table.json")
    streams = [v.stream for v in noisy_fleet]
    statics = {v.mmsi: v.static for v in noisy_fleet}
    counts = []
    for alpha in (0.2, 0.1, 0.05, 0.02, 0.01, 0.005):
        ships = extract_all(streams, statics, table, alpha)
        counts.append(sum(s.split_points for s in ships.values()))
    assert counts == sorted(counts, reverse=True)
    assert counts[0] > counts[-1]


def test_thresholds_cached_per_bin():
    table = load_table(FIXTURES / "reference_table.json")
    streams = [_stream(mmsi=1), _stream(mmsi=2)]
    statics = {1: VesselStatic(1, 30.0, 70), 2: VesselStatic(2, 40.0, 70)}
    ships = extract_all(streams, statics, table, 0.05)
    assert ships[1].thresholds is ships[2].thresholds
