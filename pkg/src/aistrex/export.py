"""Trajectory, grid and report serialisation."""

from __future__ import annotations

import csv
import json
import math
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .assess import bin_index
from .decoder import VesselStatic, make_message
from .errors import IoFailure, SchemaMismatch
from .geo import BoundingBox
from .splitter import TargetShip, Trajectory

TRAJ_COLUMNS = ("mmsi", "traj_id", "seq", "timestamp", "lat", "lon", "sog", "cog")
VESSEL_COLUMNS = ("mmsi", "ship_type", "length")
COORD_DECIMALS = 7


@contextmanager
def _open_out(path: os.PathLike | str):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _coord(x) -> str:
    return "" if x is None else f"{x:.{COORD_DECIMALS}f}"


def _opt_float(text: str):
    return None if text == "" else float(text)


def _ordered(ships: Mapping[int, TargetShip]):
    for mmsi in sorted(ships):
        yield ships[mmsi]


# -- trajectories ---------------------------------------------------------------------

def write_trajectories(ships: Mapping[int, TargetShip], path: os.PathLike | str,
                       format: str = "csv") -> None:
    """Write every trajectory as CSV rows or as a GeoJSON FeatureCollection.

    ``traj_id`` numbers the trajectories of one MMSI from 0.
    """
    if format == "csv":
        with _open_out(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJ_COLUMNS)
            for ship in _ordered(ships):
                for tid, traj in enumerate(ship.trajectories):
                    for seq, m in enumerate(traj.messages):
                        w.writerow([m.mmsi, tid, seq, _num(m.recv_time), _coord(m.lat), _coord(m.lon),
                                    _num(m.sog), _num(m.cog)])
    elif format == "geojson":
        with _open_out(path) as fh:
            json.dump(to_geojson(ships), fh, sort_keys=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown trajectory format {format!r}")


def to_geojson(ships: Mapping[int, TargetShip]) -> dict:
    features = []
    for ship in _ordered(ships):
        for tid, traj in enumerate(ship.trajectories):
            coords = [[round(m.lon, COORD_DECIMALS), round(m.lat, COORD_DECIMALS)] for m in traj.messages]
            geom = ({"type": "LineString", "coordinates": coords} if len(coords) >= 2
                    else {"type": "Point", "coordinates": coords[0]})
            features.append({
                "type": "Feature",
                "geometry": geom,
                "properties": {"mmsi": ship.mmsi, "traj_id": tid, "n_msg": len(traj),
                               "ship_type": ship.ship_type, "length": ship.length},
            })
    return {"type": "FeatureCollection", "features": features}


def write_vessels(ships: Mapping[int, TargetShip], path: os.PathLike | str) -> None:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VESSEL_COLUMNS)
        for ship in _ordered(ships):
            w.writerow([ship.mmsi, "" if ship.ship_type is None else ship.ship_type, _num(ship.length)])


def read_vessels(path: os.PathLike | str) -> dict[int, VesselStatic]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            mmsi = int(row["mmsi"])
            st = row["ship_type"]
            out[mmsi] = VesselStatic(mmsi, _opt_float(row["length"]), int(st) if st else None)
    return out


def read_trajectories(path: os.PathLike | str,
                      statics: Mapping[int, VesselStatic] | None = None) -> dict[int, TargetShip]:
    """Read a trajectory CSV back into ships; message type is not stored and reads as 1."""
    statics = statics or {}
    rows: dict[int, dict[int, list]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRAJ_COLUMNS:
            raise SchemaMismatch(f"{path}: header {header} != {list(TRAJ_COLUMNS)}")
        for row in reader:
            mmsi, tid = int(row[0]), int(row[1])
            m = make_message(float(row[3]), mmsi, _opt_float(row[4]), _opt_float(row[5]),
                             _opt_float(row[6]), _opt_float(row[7]), 1)
            rows.setdefault(mmsi, {}).setdefault(tid, []).append((int(row[2]), m))
    ships = {}
    for mmsi in sorted(rows):
        trajs = []
        for tid in sorted(rows[mmsi]):
            msgs = [m for _, m in sorted(rows[mmsi][tid], key=lambda x: x[0])]
            trajs.append(Trajectory(mmsi, msgs, (0, len(msgs))))
        ships[mmsi] = TargetShip(mmsi, statics.get(mmsi), trajs)
    return ships


# -- grids ----------------------------------------------------------------------------

class DensityGrid:
    """Message counts on ``npixels x npixels`` cells over a bounding box.

    Rows run south to north, columns west to east.
    """

    def __init__(self, bb: BoundingBox, npixels: int):
        if npixels < 1:
            raise ValueError("npixels must be at least 1")
        self.bb = bb
        self.npixels = npixels
        self.counts = np.zeros((npixels, npixels), dtype=np.int64)

    def add(self, lat, lon) -> None:
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        r = bin_index(lat, self.bb.lat_min, self.bb.lat_max, self.npixels)
        c = bin_index(lon, self.bb.lon_min, self.bb.lon_max, self.npixels)
        ok = (r >= 0) & (c >= 0)
        np.add.at(self.counts, (r[ok], c[ok]), 1)

    def merge(self, other: "DensityGrid") -> "DensityGrid":
        if self.bb != other.bb or self.npixels != other.npixels:
            raise ValueError("grids differ in extent or resolution")
        out = DensityGrid(self.bb, self.npixels)
        out.counts = self.counts + other.counts
        return out

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def manifest(self) -> dict:
        return {"bb": self.bb.as_dict(), "npixels": self.npixels,
                "rows": "latitude, south to north", "cols": "longitude, west to east",
                "total": self.total}


def density_grid(ships: Mapping[int, TargetShip] | Iterable[Trajectory], bb: BoundingBox,
                 npixels: int) -> DensityGrid:
    grid = DensityGrid(bb, npixels)
    trajs = (t for s in ships.values() for t in s.trajectories) if isinstance(ships, Mapping) else ships
    for t in trajs:
        a = t.arrays
        grid.add(a["lat"], a["lon"])
    return grid


def write_grid(values: np.ndarray, path: os.PathLike | str, manifest: dict,
               value_name: str = "count", skip_empty: bool = False) -> None:
    """Write a 2-D grid as ``row,col,<value_name>`` CSV plus ``<path>.json`` manifest.

    With ``skip_empty`` NaN cells are left out.
    """
    path = Path(path)
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("row", "col", value_name))
        integral = np.issubdtype(values.dtype, np.integer)
        for (i, j), v in np.ndenumerate(values):
            if skip_empty and not integral and math.isnan(v):
                continue
            w.writerow((i, j, int(v) if integral else repr(float(v))))
    man = dict(manifest, shape=list(values.shape), file=path.name)
    with _open_out(path.with_suffix(".json")) as fh:
        json.dump(man, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_json(obj, path: os.PathLike | str) -> None:
    with _open_out(path) as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")
