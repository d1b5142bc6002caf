"""Length-binned empirical quantile tables for the five split metrics.

A :class:`QuantileTable` holds, per metric and per ship-length bin, a
mergeable sketch and the quantile values it yields on a fixed probability
grid.  The time gap metric is pooled over all lengths; the other four are
calibrated only on pairs closer in time than the temporal gate.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .decoder import VesselStatic
from .errors import AlphaOutOfRange, EmptyBin, IoFailure, NoStaticData, SchemaVersionMismatch
from .ingest import MessageStream
from .metrics import stream_metrics
from .sketch import DEFAULT_K, KllSketch

SCHEMA_VERSION = 1
METRICS = ("dsog_abs", "rot", "dt", "dist", "speed_gap")
GATED_METRICS = ("dsog_abs", "rot", "dist", "speed_gap")
POOLED = "pooled"
P_GRID = np.round(np.arange(1, 200) * 0.005, 3)
DEFAULT_GATE_P = 0.95
DEFAULT_EDGES = (0.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0, math.inf)


@dataclass(frozen=True)
class LengthBins:
    edges: tuple = DEFAULT_EDGES

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.size < 2 or np.any(np.diff(e) <= 0):
            raise ValueError(f"bin edges must be strictly increasing: {self.edges}")

    def __len__(self) -> int:
        return len(self.edges) - 1

    def index(self, length: float | None) -> int | None:
        """Bin of ``length``; ``None`` when unknown or outside the edges."""
        if length is None or not math.isfinite(length):
            return None
        i = int(np.searchsorted(self.edges, length, side="right")) - 1
        return i if 0 <= i < len(self) else None

    def label(self, i: int) -> str:
        lo, hi = self.edges[i], self.edges[i + 1]
        return f"[{lo:g},{hi:g})m"


class SplitThresholds(NamedTuple):
    s: float                   # kn
    r: tuple[float, float]     # deg/s
    t: float                   # s
    d: float                   # nm
    b: tuple[float, float]     # kn
    alpha: float

    def as_dict(self) -> dict:
        return {"s": self.s, "r": list(self.r), "t": self.t, "d": self.d,
                "b": list(self.b), "alpha": self.alpha}


@dataclass
class QuantileFunction:
    """Empirical quantile function backed by a sketch and its grid values."""

    sketch: KllSketch
    grid: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.grid is None:
            self.refresh()

    def refresh(self) -> None:
        if self.sketch.n:
            self.grid = np.asarray(self.sketch.quantile(P_GRID), dtype=float)
        else:
            self.grid = np.empty(0)

    @property
    def count(self) -> int:
        return self.sketch.n

    def __call__(self, p: float) -> float:
        if self.sketch.n == 0:
            raise EmptyBin("quantile of an empty distribution")
        if P_GRID[0] <= p <= P_GRID[-1]:
            return float(np.interp(p, P_GRID, self.grid))
        return float(self.sketch.quantile(p))

    def merge(self, other: "QuantileFunction") -> "QuantileFunction":
        return QuantileFunction(self.sketch.merge(other.sketch))

    def to_dict(self) -> dict:
        return {"count": self.count, "grid": self.grid.tolist(), "sketch": self.sketch.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileFunction":
        return cls(KllSketch.from_dict(d["sketch"]), np.asarray(d["grid"], dtype=float))

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantileFunction):
            return NotImplemented
        return self.sketch == other.sketch and np.array_equal(self.grid, other.grid)


@dataclass
class QuantileTable:
    bins: LengthBins
    gate_p: float
    gate_value: float
    # metric -> key (POOLED or bin index) -> quantile function
    metrics: dict[str, dict[object, QuantileFunction]]
    training_window: tuple[float, float] | None = None

    def function(self, metric: str, key) -> QuantileFunction:
        qf = self.metrics[metric].get(key)
        if qf is None or qf.count == 0:
            raise EmptyBin(f"no samples for {metric} in bin {key}")
        return qf

    def resolve_bin(self, metric: str, length: float | None):
        """Key of the distribution used for a vessel of ``length``.

        Unknown lengths use the pooled table.  An empty bin falls back to the
        nearest non-empty larger bin, then the nearest smaller one.
        """
        if metric == "dt":
            return POOLED
        i = self.bins.index(length)
        if i is None:
            return POOLED
        table = self.metrics[metric]
        order = list(range(i, len(self.bins))) + list(range(i - 1, -1, -1))
        for j in order:
            qf = table.get(j)
            if qf is not None and qf.count:
                return j
        return POOLED

    def quantile(self, metric: str, length: float | None, p: float) -> float:
        return self.function(metric, self.resolve_bin(metric, length))(p)

    def counts(self) -> dict[str, dict[str, int]]:
        return {m: {str(k): qf.count for k, qf in sorted(fs.items(), key=lambda kv: str(kv[0]))}
                for m, fs in self.metrics.items()}

    def merge(self, other: "QuantileTable") -> "QuantileTable":
        """Combine two tables calibrated with the same bins and gate."""
        if self.bins != other.bins or self.gate_value != other.gate_value:
            raise ValueError("tables with different bins or temporal gate cannot be merged")
        metrics = {}
        for m in METRICS:
            a, b = self.metrics.get(m, {}), other.metrics.get(m, {})
            keys = sorted(set(a) | set(b), key=str)
            metrics[m] = {k: a[k].merge(b[k]) if k in a and k in b else (a.get(k) or b[k]) for k in keys}
        return QuantileTable(self.bins, self.gate_p, self.gate_value, metrics,
                             _union_window(self.training_window, other.training_window))

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantileTable):
            return NotImplemented
        return (self.bins == other.bins and self.gate_p == other.gate_p
                and self.gate_value == other.gate_value
                and self.training_window == other.training_window
                and self.metrics == other.metrics)


def _union_window(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return (min(a[0], b[0]), max(a[1], b[1]))


# -- calibration -------------------------------------------------------------------

def _stream_length(stream: MessageStream, statics: Mapping[int, VesselStatic]):
    st = statics.get(stream.mmsi)
    return None if st is None else st.ship_length


def dt_sketch(streams: Iterable[MessageStream], k: int = DEFAULT_K) -> KllSketch:
    """Ungated, unbinned distribution of consecutive time gaps."""
    sk = KllSketch(k)
    chunks = [np.diff(s.arrays["t"]) for s in streams if len(s) > 1]
    if chunks:
        sk.update(np.concatenate(chunks))
    return sk


def accumulate(streams: Iterable[MessageStream], statics: Mapping[int, VesselStatic],
               gate_value: float, bins: LengthBins, k: int = DEFAULT_K,
               wrap: bool = True) -> dict[str, dict[object, KllSketch]]:
    """Sketches of the gated metrics for pairs with ``0 < dt < gate_value``."""
    samples: dict[str, dict[object, list]] = {m: {} for m in GATED_METRICS}
    for s in streams:
        if len(s) < 2:
            continue
        a = s.arrays
        pm = stream_metrics(a["t"], a["lat"], a["lon"], a["sog"], a["cog"], wrap)
        use = (pm["dt"] > 0) & (pm["dt"] < gate_value)
        if not use.any():
            continue
        values = {
            "dsog_abs": np.abs(pm["dsog"][use]),
            "rot": pm["rot"][use],
            "dist": pm["dist"][use],
            "speed_gap": pm["speed_gap"][use],
        }
        i = bins.index(_stream_length(s, statics))
        for m, v in values.items():
            samples[m].setdefault(POOLED, []).append(v)
            if i is not None:
                samples[m].setdefault(i, []).append(v)
    out: dict[str, dict[object, KllSketch]] = {}
    for m, per_key in samples.items():
        out[m] = {}
        for key in [POOLED] + list(range(len(bins))):
            sk = KllSketch(k)
            if key in per_key:
                sk.update(np.concatenate(per_key[key]))
            out[m][key] = sk
    return out


def _window(streams: Sequence[MessageStream]):
    ts = [(s.messages[0].recv_time, s.messages[-1].recv_time) for s in streams if len(s)]
    if not ts:
        return None
    return (min(t[0] for t in ts), max(t[1] for t in ts))


def calibrate(streams: Iterable[MessageStream], statics: Mapping[int, VesselStatic],
              bins: LengthBins = LengthBins(), temporal_gate_p: float = DEFAULT_GATE_P,
              pooled_fallback: bool = False, k: int = DEFAULT_K,
              wrap: bool = True) -> QuantileTable:
    """Build a quantile table from filtered streams."""
    return calibrate_shards([list(streams)], statics, bins, temporal_gate_p, pooled_fallback, k, wrap)


def calibrate_shards(shards: Sequence[Sequence[MessageStream]], statics: Mapping[int, VesselStatic],
                     bins: LengthBins = LengthBins(), temporal_gate_p: float = DEFAULT_GATE_P,
                     pooled_fallback: bool = False, k: int = DEFAULT_K,
                     wrap: bool = True) -> QuantileTable:
    """Calibrate shard by shard and merge the partial sketches.

    The temporal gate is taken from the merged time-gap sketch of all shards
    before the gated metrics are accumulated.
    """
    if not 0.0 < temporal_gate_p < 1.0:
        raise AlphaOutOfRange(f"temporal gate probability {temporal_gate_p} outside (0, 1)")
    shards = [list(s) for s in shards]
    all_streams = [s for shard in shards for s in shard]
    if not pooled_fallback:
        if not any(bins.index(_stream_length(s, statics)) is not None for s in all_streams):
            raise NoStaticData("no vessel in the corpus has a known ship length")
    dt_sk = KllSketch(k)
    for shard in shards:
        dt_sk = dt_sk.merge(dt_sketch(shard, k))
    if dt_sk.n == 0:
        raise EmptyBin("corpus has no consecutive message pairs")
    gate = float(dt_sk.quantile(temporal_gate_p))
    merged: dict[str, dict[object, KllSketch]] | None = None
    for shard in shards:
        part = accumulate(shard, statics, gate, bins, k, wrap)
        if merged is None:
            merged = part
        else:
            merged = {m: {key: merged[m][key].merge(part[m][key]) for key in part[m]} for m in part}
    metrics = {"dt": {POOLED: QuantileFunction(dt_sk)}}
    for m in GATED_METRICS:
        metrics[m] = {key: QuantileFunction(sk) for key, sk in merged[m].items()}
    return QuantileTable(bins, temporal_gate_p, gate, metrics, _window(all_streams))


# -- thresholds --------------------------------------------------------------------

def thresholds(table: QuantileTable, ship_length: float | None, alpha: float) -> SplitThresholds:
    """Split thresholds for a vessel of ``ship_length`` at tail probability ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise AlphaOutOfRange(f"alpha {alpha} outside (0, 1)")

    def q(metric, p):
        return table.quantile(metric, ship_length, p)

    return SplitThresholds(
        s=q("dsog_abs", 1 - alpha),
        r=(q("rot", alpha / 2), q("rot", 1 - alpha / 2)),
        t=q("dt", 1 - alpha),
        d=q("dist", 1 - alpha),
        b=(q("speed_gap", alpha / 2), q("speed_gap", 1 - alpha / 2)),
        alpha=alpha,
    )


# -- persistence -------------------------------------------------------------------

def _edge_out(e: float):
    return None if math.isinf(e) else e


def table_to_dict(table: QuantileTable) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "bins": [_edge_out(e) for e in table.bins.edges],
        "gate_p": table.gate_p,
        "gate_value_seconds": table.gate_value,
        "training_window": list(table.training_window) if table.training_window else None,
        "grid": P_GRID.tolist(),
        "metrics": {m: {str(key): qf.to_dict() for key, qf in fs.items()}
                    for m, fs in table.metrics.items()},
    }


def table_from_dict(d: dict) -> QuantileTable:
    if d.get("version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"table version {d.get('version')!r}, expected {SCHEMA_VERSION}")
    if not np.allclose(d["grid"], P_GRID):
        raise SchemaVersionMismatch("probability grid differs from the supported grid")
    bins = LengthBins(tuple(math.inf if e is None else float(e) for e in d["bins"]))
    metrics = {}
    for m, fs in d["metrics"].items():
        metrics[m] = {(POOLED if key == POOLED else int(key)): QuantileFunction.from_dict(v)
                      for key, v in fs.items()}
    window = tuple(d["training_window"]) if d.get("training_window") else None
    return QuantileTable(bins, float(d["gate_p"]), float(d["gate_value_seconds"]), metrics, window)


def save_table(table: QuantileTable, path: os.PathLike | str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(table_to_dict(table), fh, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write table {path}: {exc}") from exc


def load_table(path: os.PathLike | str) -> QuantileTable:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read table {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaVersionMismatch(f"{path} is not a quantile table: {exc}") from exc
    return table_from_dict(d)
