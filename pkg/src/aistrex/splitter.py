"""Split vessel streams into trajectories at threshold violations and rejoin.

A consecutive pair ``(i, i+1)`` is a split point when any of these fires:

* speed change ``sog[i+1] - sog[i] > s``
* turning rate outside ``[r_lo, r_hi]``
* time gap ``> t`` (a zero time gap always splits)
* distance ``> d``
* reported minus positional speed outside ``[b_lo, b_hi]``

Fragments of a single message are dropped; neighbouring fragments whose
boundary pair no longer fires are merged again.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .decoder import AisMessage, VesselStatic
from .ingest import MessageStream, message_arrays
from .metrics import stream_metrics
from .quantiles import QuantileTable, SplitThresholds, thresholds

CONDITIONS = ("dsog", "rot", "dt", "dist", "speed_gap", "dt_zero")


@dataclass
class Trajectory:
    mmsi: int
    messages: list[AisMessage]
    source_span: tuple[int, int] = (0, 0)  # [start, end) in the parent stream

    def __len__(self) -> int:
        return len(self.messages)

    @cached_property
    def arrays(self) -> dict[str, np.ndarray]:
        return message_arrays(self.messages)


@dataclass
class TargetShip:
    mmsi: int
    static: VesselStatic | None
    trajectories: list[Trajectory] = field(default_factory=list)
    split_points: int = 0
    dropped: list[AisMessage] = field(default_factory=list)
    rejoins: int = 0
    thresholds: SplitThresholds | None = None

    @property
    def ship_type(self):
        return None if self.static is None else self.static.ship_type

    @property
    def length(self):
        return None if self.static is None else self.static.ship_length


def condition_masks(arrays: Mapping[str, np.ndarray], th: SplitThresholds,
                    wrap: bool = True) -> dict[str, np.ndarray]:
    """Boolean array per condition over the consecutive pairs of ``arrays``."""
    pm = stream_metrics(arrays["t"], arrays["lat"], arrays["lon"], arrays["sog"], arrays["cog"], wrap)
    rot, gap = pm["rot"], pm["speed_gap"]
    with np.errstate(invalid="ignore"):
        return {
            "dsog": pm["dsog"] > th.s,
            "rot": (rot < th.r[0]) | (rot > th.r[1]),
            "dt": pm["dt"] > th.t,
            "dist": pm["dist"] > th.d,
            "speed_gap": (gap < th.b[0]) | (gap > th.b[1]),
            "dt_zero": pm["dt"] == 0,
        }


def split_mask(arrays: Mapping[str, np.ndarray], th: SplitThresholds, wrap: bool = True) -> np.ndarray:
    n = len(arrays["t"])
    if n < 2:
        return np.zeros(0, dtype=bool)
    masks = condition_masks(arrays, th, wrap)
    fire = np.zeros(n - 1, dtype=bool)
    for m in masks.values():
        fire |= m
    return fire


def pair_fires(m1: AisMessage, m2: AisMessage, th: SplitThresholds, wrap: bool = True) -> bool:
    return bool(split_mask(message_arrays([m1, m2]), th, wrap)[0])


def find_split_points(stream, th: SplitThresholds, wrap: bool = True) -> list[int]:
    """Indices ``i`` such that the stream is cut between message ``i`` and ``i+1``."""
    arrays = stream.arrays if hasattr(stream, "arrays") else message_arrays(stream)
    return np.flatnonzero(split_mask(arrays, th, wrap)).tolist()


def _cut(mmsi: int, messages: Sequence[AisMessage], points: Iterable[int]):
    bounds = [0] + [i + 1 for i in sorted(points)] + [len(messages)]
    kept, dropped = [], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b - a >= 2:
            kept.append(Trajectory(mmsi, list(messages[a:b]), (a, b)))
        elif b - a == 1:
            dropped.append(messages[a])
    return kept, dropped


def split(stream: MessageStream, th: SplitThresholds, wrap: bool = True) -> list[Trajectory]:
    """Cut ``stream`` at its split points; single-message fragments are discarded."""
    kept, _ = _cut(stream.mmsi, stream.messages, find_split_points(stream, th, wrap))
    return kept


def rejoin(trajs: Sequence[Trajectory], th: SplitThresholds, wrap: bool = True) -> list[Trajectory]:
    """Merge neighbours whose boundary pair fires no condition, until nothing changes."""
    out = list(trajs)
    changed = True
    while changed and len(out) > 1:
        changed = False
        merged = [out[0]]
        for nxt in out[1:]:
            cur = merged[-1]
            if pair_fires(cur.messages[-1], nxt.messages[0], th, wrap):
                merged.append(nxt)
            else:
                merged[-1] = Trajectory(cur.mmsi, cur.messages + nxt.messages,
                                        (cur.source_span[0], nxt.source_span[1]))
                changed = True
        out = merged
    return out


def extract_ship(stream: MessageStream, static: VesselStatic | None, th: SplitThresholds | None,
                 skip_split: bool = False, wrap: bool = True) -> TargetShip:
    ship = TargetShip(stream.mmsi, static, thresholds=th)
    if skip_split or th is None:
        ship.trajectories = [Trajectory(stream.mmsi, list(stream.messages), (0, len(stream)))]
        return ship
    points = find_split_points(stream, th, wrap)
    kept, dropped = _cut(stream.mmsi, stream.messages, points)
    joined = rejoin(kept, th, wrap)
    ship.split_points = len(points)
    ship.dropped = dropped
    ship.rejoins = len(kept) - len(joined)
    ship.trajectories = joined
    return ship


def extract_all(streams: Iterable[MessageStream], statics: Mapping[int, VesselStatic],
                table: QuantileTable | None, alpha: float, skip_split: bool = False,
                wrap: bool = True) -> dict[int, TargetShip]:
    """Per-MMSI thresholds, split and rejoin.  ``skip_split`` keeps whole streams."""
    ships: dict[int, TargetShip] = {}
    cache: dict[object, SplitThresholds] = {}
    for stream in streams:
        if len(stream) == 0:
            continue
        static = statics.get(stream.mmsi)
        th = None
        if not skip_split:
            length = None if static is None else static.ship_length
            key = table.bins.index(length)
            if key not in cache:
                cache[key] = thresholds(table, length, alpha)
            th = cache[key]
        ships[stream.mmsi] = extract_ship(stream, static, th, skip_split, wrap)
    return ships
