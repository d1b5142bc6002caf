"""Mergeable quantile sketch with bounded rank error (KLL compactor hierarchy).

Level ``h`` holds items of weight ``2**h``.  When a level outgrows its
capacity it is sorted and every other item (random offset) is promoted to the
next level.  Level capacities shrink geometrically towards the bottom, so
memory stays ``O(k)`` while the rank error of a query is ``O(n / k)``.

Offsets come from a hash of ``(seed, level, compaction count)`` so the same
input always yields the same sketch.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

DEFAULT_K = 2048
_C = 2.0 / 3.0
_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class KllSketch:
    def __init__(self, k: int = DEFAULT_K, seed: int = 0):
        if k < 8:
            raise ValueError("k must be at least 8")
        self.k = k
        self.seed = seed
        self.n = 0
        self.levels: list[np.ndarray] = [np.empty(0)]
        self._compactions = 0
        self._cache = None

    # -- updates ----------------------------------------------------------------

    def _capacity(self, h: int) -> int:
        depth = len(self.levels) - 1 - h
        return max(2, int(math.ceil(self.k * _C ** depth)))

    def update(self, values: Iterable[float] | np.ndarray) -> None:
        """Add a batch of values; NaNs are ignored."""
        arr = np.asarray(values, dtype=float).ravel()
        arr = arr[~np.isnan(arr)]
        if arr.size == 0:
            return
        self.n += int(arr.size)
        self.levels[0] = np.concatenate((self.levels[0], arr))
        self._compress()

    def add(self, value: float) -> None:
        self.update([value])

    def _offset(self, h: int) -> int:
        self._compactions += 1
        return _splitmix64((self.seed << 40) ^ (h << 32) ^ self._compactions) & 1

    def _compress(self) -> None:
        self._cache = None
        h = 0
        while h < len(self.levels):
            level = self.levels[h]
            if level.size > self._capacity(h):
                if h + 1 == len(self.levels):
                    self.levels.append(np.empty(0))
                level = np.sort(level)
                keep_odd = level.size % 2
                rest, tail = (level[:-1], level[-1:]) if keep_odd else (level, level[:0])
                promoted = rest[self._offset(h)::2]
                self.levels[h] = tail.copy()
                self.levels[h + 1] = np.concatenate((self.levels[h + 1], promoted))
            h += 1

    def merge(self, other: "KllSketch") -> "KllSketch":
        """Return a new sketch summarising both inputs."""
        out = KllSketch(max(self.k, other.k), self.seed)
        depth = max(len(self.levels), len(other.levels))
        out.levels = [
            np.concatenate((self.levels[h] if h < len(self.levels) else np.empty(0),
                            other.levels[h] if h < len(other.levels) else np.empty(0)))
            for h in range(depth)
        ]
        out.n = self.n + other.n
        out._compactions = self._compactions + other._compactions
        out._compress()
        return out

    # -- queries ----------------------------------------------------------------

    def _sorted(self):
        if self._cache is None:
            vals = np.concatenate(self.levels)
            wts = np.concatenate([np.full(lv.size, float(1 << h)) for h, lv in enumerate(self.levels)])
            order = np.argsort(vals, kind="stable")
            vals = vals[order]
            cum = np.cumsum(wts[order])
            self._cache = (vals, cum)
        return self._cache

    def __len__(self) -> int:
        return self.n

    @property
    def retained(self) -> int:
        return sum(lv.size for lv in self.levels)

    def quantile(self, p):
        """Lower empirical quantile: the smallest item whose rank reaches ``p*n``.

        ``p`` may be a scalar or an array of probabilities in [0, 1].
        """
        if self.n == 0:
            raise ValueError("quantile of an empty sketch")
        vals, cum = self._sorted()
        p = np.asarray(p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        total = cum[-1]
        target = np.maximum(np.ceil(p * total - 1e-9 * total), 1.0)
        idx = np.minimum(np.searchsorted(cum, target, side="left"), vals.size - 1)
        out = vals[idx]
        return float(out) if out.ndim == 0 else out

    def rank(self, x: float) -> float:
        """Estimated fraction of items ``<= x``."""
        if self.n == 0:
            return 0.0
        vals, cum = self._sorted()
        i = np.searchsorted(vals, x, side="right")
        return 0.0 if i == 0 else float(cum[i - 1] / cum[-1])

    # -- serialisation ------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "n": self.n,
            "compactions": self._compactions,
            "levels": [lv.tolist() for lv in self.levels],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KllSketch":
        s = cls(int(d["k"]), int(d.get("seed", 0)))
        s.n = int(d["n"])
        s._compactions = int(d.get("compactions", 0))
        s.levels = [np.asarray(lv, dtype=float) for lv in d["levels"]] or [np.empty(0)]
        return s

    def __eq__(self, other) -> bool:
        if not isinstance(other, KllSketch):
            return NotImplemented
        return (self.k == other.k and self.n == other.n
                and len(self.levels) == len(other.levels)
                and all(np.array_equal(a, b) for a, b in zip(self.levels, other.levels)))
