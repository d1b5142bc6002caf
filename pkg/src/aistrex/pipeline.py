"""Stage functions shared by the command-line driver.

Each stage returns plain counters so that message conservation can be checked
end to end: rows -> decoded -> deduplicated -> filtered -> trajectories.
"""

from __future__ import annotations

import csv
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .baselines import filter_guo, send_times_from_second, split_zhao, zhao_split_points
from .decoder import VesselStatic
from .errors import FileUnreadable
from .filters import filter_messages
from .geo import METERS_PER_NM, STUDY_AREA, BoundingBox, haversine
from .ingest import (
    NMEA_SUFFIXES,
    RAW_COLUMNS,
    MessageStream,
    day_files,
    dedupe,
    group_by_mmsi,
    iter_day_file,
    read_day_files,
    static_map,
)
from .splitter import TargetShip, Trajectory

DECODED_DYNAMIC = "dynamic"
DECODED_STATIC = "static"


def _fmt_time(t: float) -> str:
    return f"{t:.0f}" if float(t).is_integer() else repr(float(t))


def _fmt_coord(x) -> str:
    return "" if x is None else f"{x:.7f}"


def _static_type(raw: str) -> int:
    # first armored character of the payload encodes the message type
    payload = raw.split()[0].split(",")[5]
    return 5 if payload[:1] == "5" else 24


# -- decode -----------------------------------------------------------------------------

def decode_file(src: Path, dest: Path) -> dict:
    """Decode one raw day file into ``dest/dynamic`` and ``dest/static``."""
    skipped: Counter = Counter()
    tally: Counter = Counter()
    dyn_rows, sta_rows = [], []
    for rec in iter_day_file(src, skipped, tally):
        if rec.kind == "dynamic":
            m = rec.record
            dyn_rows.append([_fmt_time(m.recv_time), m.msg_type, _fmt_coord(m.lat), _fmt_coord(m.lon),
                             rec.raw, m.mmsi, m.originator])
        else:
            st = rec.record
            sta_rows.append([_fmt_time(rec.recv_time), _static_type(rec.raw), "", "",
                             rec.raw, st.mmsi, rec.originator])
    name = src.stem + ".csv"
    for sub, rows in ((DECODED_DYNAMIC, dyn_rows), (DECODED_STATIC, sta_rows)):
        out = dest / sub
        out.mkdir(parents=True, exist_ok=True)
        with open(out / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RAW_COLUMNS)
            w.writerows(rows)
    return {"file": src.name, "rows": tally["rows"], "partial_rows": tally["partial"],
            "dynamic": len(dyn_rows), "static": len(sta_rows), "skipped": dict(sorted(skipped.items()))}


def _decode_job(args):
    return decode_file(*args)


def decode_directory(source: os.PathLike | str, dest: os.PathLike | str, jobs: int = 1) -> dict:
    source, dest = Path(source), Path(dest)
    files = day_files(source, (".csv",) + NMEA_SUFFIXES)
    dest.mkdir(parents=True, exist_ok=True)
    tasks = [(f, dest) for f in files]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_file = list(pool.map(_decode_job, tasks))
    else:
        per_file = [_decode_job(t) for t in tasks]
    skipped: Counter = Counter()
    for r in per_file:
        skipped.update(r["skipped"])
    return {
        "files": len(per_file),
        "rows": sum(r["rows"] for r in per_file),
        "partial_rows": sum(r["partial_rows"] for r in per_file),
        "dynamic": sum(r["dynamic"] for r in per_file),
        "static": sum(r["static"] for r in per_file),
        "skipped": dict(sorted(skipped.items())),
        "per_file": per_file,
    }


# -- corpus loading ------------------------------------------------------------------

@dataclass
class Corpus:
    streams: list[MessageStream]
    statics: dict[int, VesselStatic]
    counts: dict = field(default_factory=dict)

    @property
    def n_messages(self) -> int:
        return sum(len(s) for s in self.streams)


def resolve_dirs(decoded: os.PathLike | str, static: os.PathLike | str | None = None):
    """Dynamic and static directories of a decoded tree (or a flat directory)."""
    decoded = Path(decoded)
    if not decoded.is_dir():
        raise FileUnreadable(f"{decoded} is not a directory")
    dyn = decoded / DECODED_DYNAMIC if (decoded / DECODED_DYNAMIC).is_dir() else decoded
    if static is None:
        cand = decoded / DECODED_STATIC
        static = cand if cand.is_dir() else None
    return dyn, (Path(static) if static is not None else None)


def load_corpus(decoded: os.PathLike | str, static: os.PathLike | str | None = None,
                bb: BoundingBox = STUDY_AREA, sog_min: float = 1.0, sog_max: float = 30.0,
                f_min: float = 2.0) -> Corpus:
    """Read, deduplicate, filter and group a decoded corpus."""
    dyn_dir, sta_dir = resolve_dirs(decoded, static)
    dyn_files = day_files(dyn_dir, (".csv",) + NMEA_SUFFIXES)
    sta_files = day_files(sta_dir, (".csv",) + NMEA_SUFFIXES) if sta_dir is not None else []
    res = read_day_files(dyn_files, sta_files)
    unique = dedupe(res.messages, f_min)
    kept, drops = filter_messages(unique, bb, sog_min, sog_max)
    n_raw = len(res.messages)
    counts = {
        "raw_messages": n_raw,
        "duplicates": n_raw - len(unique),
        "duplicate_pct": 100.0 * (n_raw - len(unique)) / n_raw if n_raw else 0.0,
        "after_dedupe": len(unique),
        "filtered_out": dict(sorted(drops.items())),
        "kept": len(kept),
        "skipped_rows": dict(sorted(res.skipped.items())),
        "static_reports": len(res.statics),
    }
    return Corpus(group_by_mmsi(kept), static_map(res.statics), counts)


# -- summaries -----------------------------------------------------------------------

def trajectory_length_nm(traj: Trajectory) -> float:
    a = traj.arrays
    if len(traj) < 2:
        return 0.0
    d = haversine(a["lat"][:-1], a["lon"][:-1], a["lat"][1:], a["lon"][1:])
    return float(np.sum(d)) / METERS_PER_NM


def extract_summary(ships: Mapping[int, TargetShip], corpus: Corpus) -> dict:
    trajs = [t for s in ships.values() for t in s.trajectories]
    in_trajs = sum(len(t) for t in trajs)
    dropped = sum(len(s.dropped) for s in ships.values())
    lengths = [trajectory_length_nm(t) for t in trajs]
    return {
        "raw_messages": corpus.counts.get("raw_messages", corpus.n_messages),
        "duplicate_pct": corpus.counts.get("duplicate_pct", 0.0),
        "split_points": sum(s.split_points for s in ships.values()),
        "rejoined_tracks": sum(s.rejoins for s in ships.values()),
        "trajectory_count": len(trajs),
        "avg_trajectory_length_nm": float(np.mean(lengths)) if lengths else 0.0,
        "messages_in": corpus.n_messages,
        "messages_in_trajectories": in_trajs,
        "messages_dropped": dropped,
        "stages": corpus.counts,
    }


# -- baselines -----------------------------------------------------------------------

def extract_baseline(corpus: Corpus, method: str, c_lim: float | None = None,
                     v_lim: float | None = None) -> dict[int, TargetShip]:
    """Run a reference method over every stream of ``corpus``."""
    ships: dict[int, TargetShip] = {}
    for stream in corpus.streams:
        static = corpus.statics.get(stream.mmsi)
        ship = TargetShip(stream.mmsi, static)
        if method == "zhao":
            trajs = split_zhao(stream, send_times_from_second(stream.messages))
            kept_ids = {id(m) for t in trajs for m in t.messages}
            ship.dropped = [m for m in stream.messages if id(m) not in kept_ids]
            survivors = MessageStream(stream.mmsi, [m for m in stream.messages if id(m) in kept_ids])
            raw_cuts = len(zhao_split_points(survivors.arrays))
            ship.split_points = raw_cuts
            ship.rejoins = raw_cuts + 1 - len(trajs)
            ship.trajectories = trajs
        elif method == "guo":
            if c_lim is None or v_lim is None:
                raise ValueError("the guo method needs both c_lim and v_lim")
            kept = filter_guo(stream, c_lim, v_lim)
            kept_ids = {id(m) for m in kept.messages}
            ship.dropped = [m for m in stream.messages if id(m) not in kept_ids]
            ship.trajectories = [Trajectory(stream.mmsi, kept.messages, (0, len(stream)))]
        else:
            raise ValueError(f"unknown baseline {method!r}")
        ships[stream.mmsi] = ship
    return ships
