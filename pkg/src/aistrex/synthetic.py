"""Synthetic fleets with known anomalies, for tests and demos.

Vessels move by dead reckoning on the 6371 km sphere, so the speed implied
by consecutive positions equals the reported speed up to quantisation.
Anomalies are injected at chosen pair indices, each designed to violate one
split condition only (under thresholds s=2 kn, r=[-1, 1] deg/s, t=400 s,
d=1 nm, b=[-3, 3] kn):

``dt``        600 s silence on a slow (4 kn) vessel
``dist``      300 s silence on a fast vessel, covering more than 1 nm
``rot``       30 degree course change within one report interval
``dsog``      speed increase of 3 kn
``speed_gap`` the position jumps ahead as if moving 5 kn faster than reported
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .decoder import AisMessage, VesselStatic, encode_position, encode_static5, make_message, to_sentences
from .geo import EARTH_RADIUS_M, METERS_PER_NM
from .ingest import RAW_COLUMNS, MessageStream
from .quantiles import SplitThresholds

ANOMALY_KINDS = ("dt", "dist", "rot", "dsog", "speed_gap")
FLEET_THRESHOLDS = SplitThresholds(s=2.0, r=(-1.0, 1.0), t=400.0, d=1.0, b=(-3.0, 3.0), alpha=float("nan"))
EPOCH_2021_07_01 = 1625097600
SLOW_KN = 4.0
FAST_KN = 15.0
LENGTHS = (12.0, 19.0, 30.0, 45.0, 60.0, 80.0, 90.0, 110.0, 120.0, 140.0,
           160.0, 170.0, 185.0, 199.0, 220.0, 250.0, 300.0, 24.0, 70.0, 130.0)
SHIP_TYPES = (30, 37, 52, 60, 70, 70, 80, 36, 70, 80, 60, 70, 80, 70, 80, 70, 80, 31, 0, 99)


def destination(lat: float, lon: float, course: float, meters: float) -> tuple[float, float]:
    """End point after ``meters`` along the great circle leaving at ``course``."""
    phi1, lmb1, th = math.radians(lat), math.radians(lon), math.radians(course)
    delta = meters / EARTH_RADIUS_M
    phi2 = math.asin(math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(th))
    lmb2 = lmb1 + math.atan2(math.sin(th) * math.sin(delta) * math.cos(phi1),
                             math.cos(delta) - math.sin(phi1) * math.sin(phi2))
    return math.degrees(phi2), (math.degrees(lmb2) + 540.0) % 360.0 - 180.0


def quantize(msg: AisMessage) -> AisMessage:
    """Round fields to the resolution of the wire format."""
    q = lambda x, step: None if x is None else round(round(x / step) * step, 10)
    return msg._replace(lat=q(msg.lat, 1 / 600000), lon=q(msg.lon, 1 / 600000),
                        sog=q(msg.sog, 0.1), cog=None if msg.cog is None else q(msg.cog, 0.1) % 360.0)


@dataclass
class SyntheticVessel:
    mmsi: int
    static: VesselStatic
    messages: list[AisMessage]
    anomalies: dict[int, str] = field(default_factory=dict)  # pair index -> kind

    @property
    def stream(self) -> MessageStream:
        return MessageStream(self.mmsi, self.messages)


def simulate(mmsi: int, n: int, start: tuple[float, float], course: float, speed: float,
             t0: float = EPOCH_2021_07_01, cadence: float = 10.0, events: dict | None = None,
             rng: np.random.Generator | None = None, sog_noise: float = 0.0, cog_noise: float = 0.0,
             jitter: int = 0, msg_type: int = 1) -> list[AisMessage]:
    """Dead-reckoned track of ``n`` reports with anomalies at ``events`` pair indices."""
    events = events or {}
    rng = rng or np.random.default_rng(0)
    lat, lon = start
    t = float(t0)
    v, c = speed, course

    def report(t, lat, lon, v, c):
        sog = max(v + rng.uniform(-sog_noise, sog_noise), 0.0) if sog_noise else v
        cog = (c + rng.uniform(-cog_noise, cog_noise)) % 360.0 if cog_noise else c % 360.0
        sec = int(t) % 60
        return quantize(make_message(t, mmsi, lat, lon, sog, cog, msg_type, "", sec))

    out = [report(t, lat, lon, v, c)]
    for i in range(n - 1):
        kind = events.get(i)
        dt = cadence + (int(rng.integers(-jitter, jitter + 1)) if jitter else 0)
        step_kn = v
        if kind == "dt":
            dt = 600.0
        elif kind == "dist":
            dt = 300.0
        elif kind == "rot":
            c = c + 30.0
        elif kind == "dsog":
            step_kn = v + 1.5
            v = v + 3.0
        elif kind == "speed_gap":
            step_kn = v + 5.0
        elif kind is not None:
            raise ValueError(f"unknown anomaly kind {kind!r}")
        t += dt
        lat, lon = destination(lat, lon, c, step_kn * dt * METERS_PER_NM / 3600.0)
        out.append(report(t, lat, lon, v, c))
    return out


def _pick_indices(rng, n: int, k: int, margin: int = 5, spacing: int = 4) -> list[int]:
    chosen: list[int] = []
    while len(chosen) < k:
        i = int(rng.integers(margin, n - margin - 1))
        if all(abs(i - j) >= spacing for j in chosen):
            chosen.append(i)
    return sorted(chosen)


def make_fleet(n_vessels: int = 20, n_msgs: int = 500, seed: int = 7, anomalies: bool = True,
               noise: bool = False, jitter: int = 1) -> list[SyntheticVessel]:
    """Mixed-length fleet; with ``anomalies`` 50 injections spread over 20 vessels.

    Even-numbered vessels cruise at 4 kn and receive ``dt`` and ``rot``
    anomalies, odd-numbered ones at 15 kn receive ``dist``, ``dsog`` and
    ``speed_gap`` anomalies, one of each per vessel when 20 vessels are used.
    """
    rng = np.random.default_rng(seed)
    fleet = []
    for k in range(n_vessels):
        mmsi = 219000000 + 1000 * k + 1
        slow = k % 2 == 0
        kinds = ("dt", "rot") if slow else ("dist", "dsog", "speed_gap")
        events = {}
        if anomalies:
            for i, kind in zip(_pick_indices(rng, n_msgs, len(kinds)), rng.permutation(kinds)):
                events[i] = str(kind)
        start = (54.0 + 4.0 * rng.random(), 6.0 + 6.0 * rng.random())
        msgs = simulate(
            mmsi, n_msgs, start, course=float(rng.uniform(0, 360)), speed=SLOW_KN if slow else FAST_KN,
            t0=EPOCH_2021_07_01 + 60 * k, events=events, rng=rng,
            sog_noise=0.2 if noise else 0.0, cog_noise=1.0 if noise else 0.0, jitter=jitter,
            msg_type=18 if k % 5 == 4 else 1,
        )
        static = VesselStatic(mmsi, LENGTHS[k % len(LENGTHS)], SHIP_TYPES[k % len(SHIP_TYPES)] or None)
        fleet.append(SyntheticVessel(mmsi, static, msgs, events))
    return fleet


# -- raw day files --------------------------------------------------------------------

def _day_name(t: float) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y_%m_%d")


def write_raw_files(fleet: Sequence[SyntheticVessel], dest: os.PathLike | str,
                    duplicate_every: int = 20, seed: int = 0) -> list[Path]:
    """Write the fleet as raw day files (coordinates left to the payload).

    Every ``duplicate_every``-th report is also written as received by a
    second station one second later.  Static type-5 reports precede each
    vessel's first position report.
    """
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    rows: dict[str, list] = {}
    seq = 0
    for v in fleet:
        m0 = v.messages[0]
        bits = encode_static5(v.mmsi, _bow(v.static), _stern(v.static), v.static.ship_type or 0,
                              name=f"SYN{v.mmsi % 100000}", callsign="SYN")
        seq = (seq + 1) % 10
        raw = " ".join(to_sentences(bits, sequence_id=seq))
        rows.setdefault(_day_name(m0.recv_time), []).append((m0.recv_time - 1, 5, raw, v.mmsi, "DK"))
        for i, m in enumerate(v.messages):
            raw = to_sentences(encode_position(m))[0]
            day = rows.setdefault(_day_name(m.recv_time), [])
            day.append((m.recv_time, m.msg_type, raw, m.mmsi, "DK"))
            if duplicate_every and i % duplicate_every == duplicate_every - 1:
                day.append((m.recv_time + 1, m.msg_type, raw, m.mmsi, "SE"))
    paths = []
    for day in sorted(rows):
        path = dest / f"{day}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RAW_COLUMNS)
            for ts, mtype, raw, mmsi, orig in sorted(rows[day], key=lambda r: (r[0], r[3], r[4])):
                w.writerow([f"{ts:.0f}" if float(ts).is_integer() else repr(ts), mtype, "", "", raw, mmsi, orig])
        paths.append(path)
    return paths


def _bow(st: VesselStatic) -> int:
    return 0 if st.ship_length is None else int(st.ship_length) - _stern(st)


def _stern(st: VesselStatic) -> int:
    return 0 if st.ship_length is None else int(st.ship_length) // 4
