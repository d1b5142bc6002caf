"""Two reference segmentation methods and the comparison table.

* Zhao et al. style: fixed speed (15 kn) and gap (600 s) limits, then rejoin
  on speed only.
* Guo et al. style: forward scan dropping messages whose turning rate or
  implied speed relative to the last kept message exceeds fixed limits.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .decoder import AisMessage
from .ingest import MessageStream, message_arrays
from .metrics import course_difference, stream_metrics
from .splitter import Trajectory

log = logging.getLogger(__name__)

ZHAO_MAX_SOG = 15.0      # kn
ZHAO_MAX_GAP = 600.0     # s
ZHAO_MAX_DELAY = 5.0     # s, reception minus sending time
GUO_EXAMPLE_V_LIM = 30.0  # kn
GUO_EXAMPLE_C_LIM = 2.0   # deg/s


def send_times_from_second(messages: Sequence[AisMessage]) -> list[float | None]:
    """Reconstruct sending times from the UTC-second field of each report.

    The send time is the latest instant not after reception whose second
    matches the reported one.  Reports without a valid second give ``None``.
    """
    out: list[float | None] = []
    for m in messages:
        sec = m.second
        if sec is None or not 0 <= sec <= 59:
            out.append(None)
            continue
        minute = math.floor(m.recv_time / 60.0) * 60.0
        cand = minute + sec
        if cand > m.recv_time:
            cand -= 60.0
        out.append(cand)
    return out


def zhao_split_points(arrays: Mapping[str, np.ndarray]) -> list[int]:
    if len(arrays["t"]) < 2:
        return []
    pm = stream_metrics(arrays["t"], arrays["lat"], arrays["lon"], arrays["sog"], arrays["cog"])
    est = (arrays["sog"][:-1] + arrays["sog"][1:]) / 2.0 - pm["speed_gap"]
    with np.errstate(invalid="ignore"):
        fire = (est > ZHAO_MAX_SOG) | (pm["dt"] > ZHAO_MAX_GAP)
    return np.flatnonzero(fire).tolist()


def _est_sog_pair(a) -> float:
    pm = stream_metrics(a["t"], a["lat"], a["lon"], a["sog"], a["cog"])
    return float((a["sog"][0] + a["sog"][1]) / 2.0 - pm["speed_gap"][0])


def split_zhao(stream: MessageStream, send_time: Sequence[float | None] | None = None) -> list[Trajectory]:
    """Segment ``stream`` with fixed speed and gap limits.

    With ``send_time`` messages delayed by more than 5 s are dropped first.
    Single-message fragments are kept so that every surviving message ends up
    in exactly one trajectory.
    """
    msgs = list(stream.messages)
    if send_time is None:
        log.warning("no sending times available for MMSI %s; delay filter skipped", stream.mmsi)
    else:
        if len(send_time) != len(msgs):
            raise ValueError("send_time must align with the stream")
        msgs = [m for m, s in zip(msgs, send_time)
                if s is None or abs(m.recv_time - s) <= ZHAO_MAX_DELAY]
    if not msgs:
        return []
    points = zhao_split_points(message_arrays(msgs))
    bounds = [0] + [i + 1 for i in points] + [len(msgs)]
    frags = [msgs[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    joined = [frags[0]]
    for frag in frags[1:]:
        pair = message_arrays([joined[-1][-1], frag[0]])
        est = _est_sog_pair(pair)
        # a zero time gap gives no speed estimate; keep the cut
        if np.isnan(est) or est > ZHAO_MAX_SOG:
            joined.append(frag)
        else:
            joined[-1] = joined[-1] + frag
    out, start = [], 0
    for frag in joined:
        out.append(Trajectory(stream.mmsi, frag, (start, start + len(frag))))
        start += len(frag)
    return out


def filter_guo(stream: MessageStream, c_lim: float, v_lim: float) -> MessageStream:
    """Drop messages whose turn rate or implied speed vs the last kept one is too high."""
    if not (c_lim > 0 and v_lim > 0):
        raise ValueError("c_lim and v_lim must be positive")
    msgs = stream.messages
    if not msgs:
        return MessageStream(stream.mmsi, [])
    kept = [msgs[0]]
    for m in msgs[1:]:
        last = kept[-1]
        a = message_arrays([last, m])
        dt = a["t"][1] - a["t"][0]
        if dt <= 0:
            continue
        est = _est_sog_pair(a)
        rot = abs(course_difference(a["cog"][0], a["cog"][1])) / dt
        if est > v_lim or (not np.isnan(rot) and rot > c_lim):
            continue
        kept.append(m)
    return MessageStream(stream.mmsi, kept)


# -- comparison ------------------------------------------------------------------------

class Witness(NamedTuple):
    mmsi: int
    trajectory: int
    pair: int  # index i of the pair (i, i+1) within the trajectory


class ComparisonRow(NamedTuple):
    method: str
    discarded_messages: int
    split_points: int
    max_turning_rate: float        # deg/s
    max_velocity_change: float     # kn/s
    max_distance: float            # nm
    witness_turning_rate: Witness | None
    witness_velocity_change: Witness | None
    witness_distance: Witness | None


COLUMNS = ("method", "discarded_messages", "split_points", "max_turning_rate_deg_s",
           "max_velocity_change_kn_s", "max_distance_nm",
           "witness_turning_rate", "witness_velocity_change", "witness_distance")


class ComparisonReport(NamedTuple):
    rows: list[ComparisonRow]

    def row(self, method: str) -> ComparisonRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r.method, r.discarded_messages, r.split_points,
                        _fmt(r.max_turning_rate), _fmt(r.max_velocity_change), _fmt(r.max_distance),
                        _fmt_w(r.witness_turning_rate), _fmt_w(r.witness_velocity_change),
                        _fmt_w(r.witness_distance)])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _fmt_w(w: Witness | None) -> str:
    return "" if w is None else f"{w.mmsi}:{w.trajectory}:{w.pair}"


def _method_row(name: str, trajs: Sequence[Trajectory], n_raw: int) -> ComparisonRow:
    n_kept = sum(len(t) for t in trajs)
    per_mmsi: dict[int, int] = {}
    for t in trajs:
        per_mmsi[t.mmsi] = per_mmsi.get(t.mmsi, 0) + 1
    best = {"rot": (0.0, None), "dv": (0.0, None), "dist": (0.0, None)}
    seen: dict[int, int] = {}
    for t in trajs:
        j = seen.get(t.mmsi, 0)
        seen[t.mmsi] = j + 1
        if len(t) < 2:
            continue
        a = t.arrays
        pm = stream_metrics(a["t"], a["lat"], a["lon"], a["sog"], a["cog"])
        ok = pm["dt"] > 0
        dt = np.where(ok, pm["dt"], 1.0)
        cand = {
            "rot": np.where(ok, np.abs(pm["rot"]), np.nan),
            "dv": np.where(ok, np.abs(pm["dsog"]) / dt, np.nan),
            "dist": pm["dist"],
        }
        for key, arr in cand.items():
            if np.all(np.isnan(arr)):
                continue
            i = int(np.nanargmax(arr))
            if best[key][1] is None or arr[i] > best[key][0]:
                best[key] = (float(arr[i]), Witness(t.mmsi, j, i))
    return ComparisonRow(
        method=name,
        discarded_messages=n_raw - n_kept,
        split_points=sum(c - 1 for c in per_mmsi.values()),
        max_turning_rate=best["rot"][0],
        max_velocity_change=best["dv"][0],
        max_distance=best["dist"][0],
        witness_turning_rate=best["rot"][1],
        witness_velocity_change=best["dv"][1],
        witness_distance=best["dist"][1],
    )


def compare(trajectory_sets: Mapping[str, Sequence[Trajectory]],
            raw: MessageStream | Sequence[MessageStream]) -> ComparisonReport:
    """Table of discards, split points and maximum pair metrics per method.

    The split point count of a method is the number of cuts its output implies:
    trajectories minus one, per MMSI.
    """
    if isinstance(raw, MessageStream):
        n_raw = len(raw)
    else:
        n_raw = sum(len(s) for s in raw)
    return ComparisonReport([_method_row(name, list(trajs), n_raw)
                             for name, trajs in trajectory_sets.items()])
