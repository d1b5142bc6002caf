"""Per-message exclusion: spatial bounds, SOG window and unavailable values."""

from __future__ import annotations

import json
from collections import Counter
from typing import Callable, Iterable, Sequence

from .decoder import SOG_NOT_AVAILABLE, AisMessage
from .geo import STUDY_AREA, BoundingBox

SOG_MIN = 1.0
SOG_MAX = 30.0

# rejection reasons, in the order they are tested
POSITION_UNAVAILABLE = "position_unavailable"
OUT_OF_BOUNDS = "out_of_bounds"
SOG_UNAVAILABLE = "sog_unavailable"
SOG_TOO_LOW = "sog_below_min"
SOG_TOO_HIGH = "sog_above_max"
REASONS = (POSITION_UNAVAILABLE, OUT_OF_BOUNDS, SOG_UNAVAILABLE, SOG_TOO_LOW, SOG_TOO_HIGH)


def rejection_reason(m: AisMessage, bb: BoundingBox, sog_min: float, sog_max: float) -> str | None:
    if m.lat is None or m.lon is None:
        return POSITION_UNAVAILABLE
    if not bb.contains(m.lat, m.lon):
        return OUT_OF_BOUNDS
    sog = m.sog
    if sog is None or sog == SOG_NOT_AVAILABLE:
        return SOG_UNAVAILABLE
    if sog < sog_min:
        return SOG_TOO_LOW
    if sog > sog_max:
        return SOG_TOO_HIGH
    return None


def filter_messages(messages: Iterable[AisMessage], bb: BoundingBox = STUDY_AREA,
                    sog_min: float = SOG_MIN, sog_max: float = SOG_MAX) -> tuple[list[AisMessage], Counter]:
    """Keep messages inside ``bb`` whose SOG lies in the closed ``[sog_min, sog_max]``.

    Returns ``(kept, drop_stats)`` where ``drop_stats`` counts rejections by
    reason.  Every reason key is present, so the counter doubles as a report.
    """
    if not sog_min < sog_max:
        raise ValueError(f"sog_min {sog_min} must be below sog_max {sog_max}")
    kept = []
    stats = Counter({r: 0 for r in REASONS})
    for m in messages:
        reason = rejection_reason(m, bb, sog_min, sog_max)
        if reason is None:
            kept.append(m)
        else:
            stats[reason] += 1
    return kept, stats


def apply_preprocessor(messages: Iterable[AisMessage],
                       predicate: Callable[[AisMessage], bool]) -> list[AisMessage]:
    """Order-preserving selection of the messages for which ``predicate`` holds."""
    return [m for m in messages if predicate(m)]


def drop_report(stats: Counter, n_input: int, n_kept: int) -> str:
    """JSON drop report keyed by reason."""
    return json.dumps({"input": n_input, "kept": n_kept, "dropped": dict(sorted(stats.items()))},
                      sort_keys=True)


def reconciles(stats: Counter, n_input: int, n_kept: int) -> bool:
    return sum(stats.values()) + n_kept == n_input


def only_types(types: Sequence[int]) -> Callable[[AisMessage], bool]:
    wanted = frozenset(types)
    return lambda m: m.msg_type in wanted
