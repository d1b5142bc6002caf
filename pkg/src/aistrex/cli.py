"""Command-line driver: decode, calibrate, extract, assess, compare, synth.

Settings resolve as command-line flag, then config file (TOML, given by
``--config`` or the ``AISTREX_CONFIG`` environment variable), then built-in
default.  Every command prints a JSON summary on stdout and exits 0 only when
no fatal error occurred.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .assess import (
    all_trajectories,
    assess,
    convex_hull_area,
    inspect,
    pixel_map,
    ship_type_hull_average,
    too_few_obs,
)
from .baselines import compare
from .errors import AisTrexError
from .export import density_grid, read_trajectories, read_vessels, write_grid, write_json
from .export import write_trajectories, write_vessels
from .geo import STUDY_AREA, BoundingBox
from .pipeline import decode_directory, extract_baseline, extract_summary, load_corpus
from .quantiles import DEFAULT_GATE_P, calibrate, load_table, save_table
from .splitter import extract_all

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("aistrex")

CONFIG_ENV = "AISTREX_CONFIG"
DEFAULTS = {
    "bounds": [STUDY_AREA.lat_min, STUDY_AREA.lat_max, STUDY_AREA.lon_min, STUDY_AREA.lon_max],
    "sog_min": 1.0,
    "sog_max": 30.0,
    "alpha": 0.05,
    "gate_p": DEFAULT_GATE_P,
    "f_min": 2.0,
    "jobs": os.cpu_count() or 1,
    "min_msgs": None,
    "min_hull_area": None,
    "heatmap": None,
    "c_lim": None,
    "v_lim": None,
    "pooled_fallback": False,
}


class UsageError(Exception):
    pass


def load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def resolve(args: argparse.Namespace, key: str):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in args.config_values:
        return args.config_values[key]
    return DEFAULTS[key]


def _bounds(args) -> BoundingBox:
    b = resolve(args, "bounds")
    if len(b) != 4:
        raise UsageError("bounds need four numbers: lat_min lat_max lon_min lon_max")
    return BoundingBox(*map(float, b))


def _emit(summary: dict) -> None:
    json.dump(summary, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")


def _corpus(args):
    return load_corpus(args.decoded, args.static, _bounds(args), float(resolve(args, "sog_min")),
                       float(resolve(args, "sog_max")), float(resolve(args, "f_min")))


# -- commands -------------------------------------------------------------------------

def cmd_decode(args) -> int:
    src = Path(args.source)
    if not src.is_dir():
        raise UsageError(f"source {src} is not a directory")
    summary = decode_directory(src, args.dest, int(resolve(args, "jobs")))
    _emit(summary)
    return 0


def cmd_calibrate(args) -> int:
    corpus = _corpus(args)
    table = calibrate(corpus.streams, corpus.statics, temporal_gate_p=float(resolve(args, "gate_p")),
                      pooled_fallback=bool(resolve(args, "pooled_fallback")))
    save_table(table, args.out)
    _emit({
        "table": str(args.out),
        "gate_p": table.gate_p,
        "gate_value_seconds": table.gate_value,
        "training_window": list(table.training_window) if table.training_window else None,
        "counts": table.counts(),
        "stages": corpus.counts,
    })
    return 0


def cmd_extract(args) -> int:
    skip = args.skip_split
    baseline = args.baseline
    if not skip and baseline is None and args.table is None:
        raise UsageError("--table is required unless --skip-split or --baseline is given")
    alpha = float(resolve(args, "alpha"))
    corpus = _corpus(args)
    if baseline is not None:
        c_lim, v_lim = resolve(args, "c_lim"), resolve(args, "v_lim")
        if baseline == "guo" and (c_lim is None or v_lim is None):
            raise UsageError("--baseline guo needs --c-lim and --v-lim")
        ships = extract_baseline(corpus, baseline, c_lim, v_lim)
    else:
        table = None if skip else load_table(args.table)
        ships = extract_all(corpus.streams, corpus.statics, table, alpha, skip_split=skip)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectories(ships, out / "trajectories.csv", "csv")
    write_trajectories(ships, out / "trajectories.geojson", "geojson")
    write_vessels(ships, out / "vessels.csv")
    summary = extract_summary(ships, corpus)
    summary.update(method=baseline or ("none" if skip else "alpha"), alpha=None if skip or baseline else alpha)
    write_json(summary, out / "summary.json")
    _emit(summary)
    return 0


def cmd_assess(args) -> int:
    traj_file = Path(args.trajectories)
    vessels = Path(args.vessels) if args.vessels else traj_file.with_name("vessels.csv")
    statics = read_vessels(vessels) if vessels.exists() else {}
    ships = read_trajectories(traj_file, statics)
    recipe = []
    min_msgs, min_area = resolve(args, "min_msgs"), resolve(args, "min_hull_area")
    if min_msgs is not None:
        recipe.append(too_few_obs(int(min_msgs)))
    if min_area is not None:
        recipe.append(convex_hull_area(float(min_area)))
    accepted, rejected = inspect(ships, recipe)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    reports = []
    with open(out / "assessment.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("mmsi", "traj_id", "n_msg", "hull_area_m2", "avg_complexity",
                    "avg_abs_course_change_deg", "accepted"))
        for mmsi in sorted(ships):
            acc_ids = {id(t) for t in accepted[mmsi].trajectories} if mmsi in accepted else set()
            for tid, t in enumerate(ships[mmsi].trajectories):
                r = assess(t)
                reports.append((r, id(t) in acc_ids))
                w.writerow((mmsi, tid, r.n_msg, repr(r.hull_area),
                            "" if r.avg_complexity is None else repr(r.avg_complexity),
                            "" if r.avg_abs_course_change is None else repr(r.avg_abs_course_change),
                            int(id(t) in acc_ids)))
    accepted_reports = [r for r, ok in reports if ok]
    pm = pixel_map([], reports=accepted_reports)
    write_grid(pm.values, out / "pixel_map.csv", pm.manifest(), "mean_abs_course_change_deg", skip_empty=True)
    averages = ship_type_hull_average(accepted)
    write_json(averages, out / "ship_type_hull_average.json")
    n_acc = sum(len(s.trajectories) for s in accepted.values())
    n_rej = sum(len(s.trajectories) for s in rejected.values())
    summary = {
        "trajectories": n_acc + n_rej,
        "accepted": n_acc,
        "rejected": n_rej,
        "recipe": [r.name for r in recipe],
        "ship_type_hull_average": averages,
        "pixel_map_cells": int((pm.counts > 0).sum()),
    }
    npix = resolve(args, "heatmap")
    if npix is not None:
        bb = _bounds(args)
        grid = density_grid(all_trajectories(accepted), bb, int(npix))
        write_grid(grid.counts, out / "density.csv", grid.manifest())
        positions = sum(1 for t in all_trajectories(accepted) for m in t.messages if bb.contains(m.lat, m.lon))
        summary["density"] = {"npixels": int(npix), "total": grid.total, "in_bounds_positions": positions}
    write_json(summary, out / "summary.json")
    _emit(summary)
    return 0


def cmd_compare(args) -> int:
    c_lim, v_lim = resolve(args, "c_lim"), resolve(args, "v_lim")
    if c_lim is None or v_lim is None:
        raise UsageError("compare runs the guo method and needs --c-lim and --v-lim")
    alpha = float(resolve(args, "alpha"))
    corpus = _corpus(args)
    table = load_table(args.table)
    proposed = extract_all(corpus.streams, corpus.statics, table, alpha)
    sets = {
        "raw": [t for s in extract_all(corpus.streams, corpus.statics, None, alpha, skip_split=True).values()
                for t in s.trajectories],
        f"alpha={alpha:g}": all_trajectories(proposed),
        "zhao": all_trajectories(extract_baseline(corpus, "zhao")),
        "guo": all_trajectories(extract_baseline(corpus, "guo", float(c_lim), float(v_lim))),
    }
    report = compare(sets, corpus.streams)
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    _emit({"rows": [r.method for r in report.rows], "out": args.out,
           "split_points": {r.method: r.split_points for r in report.rows},
           "discarded_messages": {r.method: r.discarded_messages for r in report.rows}})
    return 0


def cmd_synth(args) -> int:
    from .synthetic import make_fleet, write_raw_files

    fleet = make_fleet(args.vessels, args.messages, seed=args.seed, noise=not args.clean)
    paths = write_raw_files(fleet, args.out)
    _emit({"files": [p.name for p in paths], "vessels": len(fleet),
           "messages": sum(len(v.messages) for v in fleet),
           "anomalies": sum(len(v.anomalies) for v in fleet)})
    return 0


# -- parser ---------------------------------------------------------------------------

def _add_filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bounds", nargs=4, type=float, metavar=("LAT_MIN", "LAT_MAX", "LON_MIN", "LON_MAX"))
    p.add_argument("--sog-min", type=float, dest="sog_min")
    p.add_argument("--sog-max", type=float, dest="sog_max")
    p.add_argument("--f-min", type=float, dest="f_min", help="duplicate window in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aistrex", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help=f"TOML config file (default: ${CONFIG_ENV})")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode raw day files")
    p.add_argument("source")
    p.add_argument("dest")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("calibrate", help="build a quantile table")
    p.add_argument("decoded")
    p.add_argument("--static", help="directory of static day files")
    p.add_argument("--out", required=True)
    p.add_argument("--gate-p", type=float, dest="gate_p")
    p.add_argument("--pooled-fallback", action="store_const", const=True, dest="pooled_fallback")
    _add_filter_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("extract", help="split streams into trajectories")
    p.add_argument("decoded")
    p.add_argument("--static")
    p.add_argument("--table")
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--skip-split", action="store_true", dest="skip_split")
    p.add_argument("--baseline", choices=("zhao", "guo"))
    p.add_argument("--c-lim", type=float, dest="c_lim")
    p.add_argument("--v-lim", type=float, dest="v_lim")
    _add_filter_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("assess", help="assess extracted trajectories")
    p.add_argument("trajectories")
    p.add_argument("--vessels", help="vessel sidecar CSV (default: next to the trajectories)")
    p.add_argument("--out", required=True)
    p.add_argument("--min-msgs", type=int, dest="min_msgs")
    p.add_argument("--min-hull-area", type=float, dest="min_hull_area")
    p.add_argument("--heatmap", type=int, metavar="NPIXELS")
    p.add_argument("--bounds", nargs=4, type=float, metavar=("LAT_MIN", "LAT_MAX", "LON_MIN", "LON_MAX"))
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("compare", help="compare against the reference methods")
    p.add_argument("decoded")
    p.add_argument("--static")
    p.add_argument("--table", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--c-lim", type=float, dest="c_lim")
    p.add_argument("--v-lim", type=float, dest="v_lim")
    p.add_argument("--out")
    _add_filter_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="write a synthetic raw corpus")
    p.add_argument("out")
    p.add_argument("--vessels", type=int, default=20)
    p.add_argument("--messages", type=int, default=500)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--clean", action="store_true", help="no measurement noise on SOG and COG")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.config_values = load_config(args.config)
        return args.func(args)
    except UsageError as exc:
        print(f"aistrex {args.command}: {exc}", file=sys.stderr)
        return 2
    except (AisTrexError, OSError, ValueError) as exc:
        print(f"aistrex {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
