import contextlib
import io
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

import oracles
from aistrex import cli
from aistrex.quantiles import POOLED, load_table
from aistrex.pipeline import load_corpus

FIXTURES = Path(__file__).parent / "fixtures"


def run(*argv):
    """Run the CLI, returning (exit code, parsed stdout or None)."""
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main([str(a) for a in argv])
    text = buf.getvalue().strip()
    return code, (json.loads(text.splitlines()[-1]) if text else None)


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run("synth", root / "raw", "--vessels", 4, "--messages", 150, "--seed", 11)[0] == 0
    assert run("decode", root / "raw", root / "dec", "--jobs", 1)[0] == 0
    assert run("calibrate", root / "dec", "--out", root / "table.json")[0] == 0
    return root


@pytest.fixture(scope="module")
def extracted(corpus_dir):
    out = corpus_dir / "ext"
    code, summary = run("extract", corpus_dir / "dec", "--table", corpus_dir / "table.json",
                        "--alpha", 0.03, "--out", out)
    assert code == 0
    return out, summary


# -- decode ---------------------------------------------------------------------------

def test_decode_fixture_day(tmp_path):
    src = tmp_path / "raw"
    src.mkdir()
    shutil.copy(FIXTURES / "2021_07_01.csv", src)
    code, summary = run("decode", src, tmp_path / "dec")
    assert code == 0
    assert (summary["files"], summary["rows"], summary["dynamic"], summary["static"]) == (1, 3, 3, 0)
    lines = (tmp_path / "dec" / "dynamic" / "2021_07_01.csv").read_text().splitlines()
    assert lines[0] == "timestamp,message_id,latitude,longitude,raw_message,MMSI,originator"
    assert [ln.split(",")[-2] for ln in lines[1:]] == ["244000128", "219000100", "219000101"]


def test_decode_empty_directory(tmp_path):
    (tmp_path / "raw").mkdir()
    code, summary = run("decode", tmp_path / "raw", tmp_path / "dec")
    assert code == 0 and summary["files"] == 0 and summary["rows"] == 0


def test_decode_missing_source(tmp_path):
    assert run("decode", tmp_path / "nope", tmp_path / "dec")[0] != 0


# -- calibrate ------------------------------------------------------------------------

def test_calibrate_median_gap(corpus_dir):
    table = load_table(corpus_dir / "table.json")
    corpus = load_corpus(corpus_dir / "dec")
    dts = np.concatenate([np.diff(s.arrays["t"]) for s in corpus.streams])
    assert table.function("dt", POOLED)(0.5) == pytest.approx(oracles.sort_quantile(dts, 0.5))
    assert table.gate_p == 0.95
    assert table.gate_value == oracles.sort_quantile(dts, 0.95)


def test_calibrate_without_statics(corpus_dir, tmp_path):
    empty = tmp_path / "static"
    empty.mkdir()
    base = ("calibrate", corpus_dir / "dec", "--static", empty, "--out", tmp_path / "t.json")
    assert run(*base)[0] != 0
    code, summary = run(*base, "--pooled-fallback")
    assert code == 0 and summary["gate_p"] == 0.95


def test_calibrate_gate_p_flag(corpus_dir, tmp_path):
    code, summary = run("calibrate", corpus_dir / "dec", "--out", tmp_path / "t.json", "--gate-p", 0.9)
    assert code == 0 and summary["gate_p"] == 0.9
    assert load_table(tmp_path / "t.json").gate_p == 0.9


# -- extract --------------------------------------------------------------------------

def test_extract_needs_table(corpus_dir, tmp_path):
    assert run("extract", corpus_dir / "dec", "--out", tmp_path / "o")[0] == 2


def test_extract_summary(extracted):
    out, summary = extracted
    for key in ("raw_messages", "duplicate_pct", "split_points", "rejoined_tracks",
                "trajectory_count", "avg_trajectory_length_nm"):
        assert key in summary
    assert summary["alpha"] == 0.03 and summary["split_points"] >= 1
    assert json.loads((out / "summary.json").read_text()) == summary
    for name in ("trajectories.csv", "trajectories.geojson", "vessels.csv"):
        assert (out / name).is_file()


def test_extract_skip_split(corpus_dir, tmp_path):
    code, summary = run("extract", corpus_dir / "dec", "--skip-split", "--out", tmp_path / "o")
    assert code == 0 and summary["split_points"] == 0 and summary["trajectory_count"] == 4
    assert summary["messages_in_trajectories"] == summary["messages_in"]


def test_extract_baselines(corpus_dir, tmp_path):
    code, summary = run("extract", corpus_dir / "dec", "--baseline", "zhao", "--out", tmp_path / "z")
    assert code == 0 and summary["method"] == "zhao"
    assert run("extract", corpus_dir / "dec", "--baseline", "guo", "--out", tmp_path / "g")[0] == 2
    code, summary = run("extract", corpus_dir / "dec", "--baseline", "guo", "--c-lim", 2, "--v-lim", 30,
                        "--out", tmp_path / "g")
    assert code == 0 and summary["method"] == "guo"


# -- assess ---------------------------------------------------------------------------

def test_assess_recipe(extracted, tmp_path):
    out, ext = extracted
    code, summary = run("assess", out / "trajectories.csv", "--out", tmp_path / "a",
                        "--min-msgs", 50, "--min-hull-area", 3e5)
    assert code == 0
    assert summary["recipe"] == ["too_few_obs(n=50)", "convex_hull_area(area=300000)"]
    assert summary["trajectories"] == ext["trajectory_count"]
    rows = (tmp_path / "a" / "assessment.csv").read_text().splitlines()[1:]
    for row in rows:
        f = row.split(",")
        if f[-1] == "1":
            assert int(f[2]) >= 50 and float(f[3]) >= 3e5
    assert sum(r.endswith(",1") for r in rows) == summary["accepted"]


def test_assess_no_recipe_accepts_all(extracted, tmp_path):
    out, ext = extracted
    code, summary = run("assess", out / "trajectories.csv", "--out", tmp_path / "a")
    assert code == 0 and summary["rejected"] == 0 and summary["accepted"] == ext["trajectory_count"]
    for name in ("pixel_map.csv", "pixel_map.json", "ship_type_hull_average.json", "summary.json"):
        assert (tmp_path / "a" / name).is_file()


def test_assess_heatmap(extracted, tmp_path):
    out, _ = extracted
    code, summary = run("assess", out / "trajectories.csv", "--out", tmp_path / "a", "--heatmap", 500)
    assert code == 0
    man = json.loads((tmp_path / "a" / "density.json").read_text())
    assert man["shape"] == [500, 500] and man["npixels"] == 500
    assert summary["density"]["total"] == summary["density"]["in_bounds_positions"]


# -- compare --------------------------------------------------------------------------

def test_compare_needs_limits(corpus_dir):
    assert run("compare", corpus_dir / "dec", "--table", corpus_dir / "table.json", "--c-lim", 2)[0] == 2


def test_compare_rows(corpus_dir, tmp_path):
    code, summary = run("compare", corpus_dir / "dec", "--table", corpus_dir / "table.json",
                        "--c-lim", 2, "--v-lim", 30, "--out", tmp_path / "cmp.csv")
    assert code == 0
    assert summary["rows"] == ["raw", "alpha=0.05", "zhao", "guo"]
    assert summary["split_points"]["raw"] == 0 and summary["discarded_messages"]["raw"] == 0
    assert summary["split_points"]["alpha=0.05"] >= 1
    header = (tmp_path / "cmp.csv").read_text().splitlines()[0]
    assert header.startswith("method,discarded_messages,split_points")


# -- config ---------------------------------------------------------------------------

def test_config_precedence(corpus_dir, tmp_path, monkeypatch):
    cfg = tmp_path / "c.toml"
    cfg.write_text("alpha = 0.1\n")
    args = ("extract", corpus_dir / "dec", "--table", corpus_dir / "table.json")
    assert run("--config", cfg, *args, "--out", tmp_path / "1")[1]["alpha"] == 0.1
    assert run("--config", cfg, *args, "--alpha", 0.02, "--out", tmp_path / "2")[1]["alpha"] == 0.02
    monkeypatch.setenv(cli.CONFIG_ENV, str(cfg))
    assert run(*args, "--out", tmp_path / "3")[1]["alpha"] == 0.1
    monkeypatch.delenv(cli.CONFIG_ENV)
    assert run(*args, "--out", tmp_path / "4")[1]["alpha"] == 0.05


def test_config_unknown_key(corpus_dir, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("alpah = 0.1\n")
    assert run("--config", cfg, "extract", corpus_dir / "dec", "--skip-split", "--out", tmp_path / "o")[0] == 2
