"""End-to-end CLI behavior: artifacts, determinism, exit codes."""

import csv
import json
import subprocess
import sys

import pytest
from scipy import stats

from looptrees.cli import main
from looptrees.trees import read_dsv


def _jsonl(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f]


def test_sample_tree_exact_size_writes_dsv1(tmp_path, capsys):
    rc = main(["sample-tree", "--law", "binary", "--n", "9", "--exact-size",
               "--out", str(tmp_path)])
    assert rc == 0
    files = sorted(tmp_path.glob("tree-*.dsv"))
    assert len(files) == 1
    tree = read_dsv(files[0])
    assert tree.n == 9
    assert set(tree.degree_seq.tolist()) <= {0, 2}
    recs = _jsonl(tmp_path / "sample-tree.jsonl")
    assert recs[0]["statistic"] == "tree-vertices"
    assert recs[0]["value"] == 9
    assert "vertices=9" in capsys.readouterr().out


def test_sample_tree_rerun_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["sample-tree", "--n", "40", "--exact-size", "--count", "2",
                     "--seed", "3", "--out", str(tmp_path / d)]) == 0
    for name in ("tree-*.dsv", "sample-tree.jsonl", "sample-tree.csv"):
        a = sorted((tmp_path / "a").glob(name))
        b = sorted((tmp_path / "b").glob(name))
        assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]


def test_sample_tree_inline_law_spec(tmp_path):
    spec = '{"kind": "geometric", "params": {"p": 0.5}}'
    assert main(["sample-tree", "--law", spec, "--n", "12", "--exact-size",
                 "--out", str(tmp_path)]) == 0
    (f,) = tmp_path.glob("tree-*.dsv")
    assert read_dsv(f).n == 12


def test_out_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("LOOPTREES_OUT", str(tmp_path / "via-env"))
    assert main(["sample-tree", "--n", "8", "--exact-size"]) == 0
    assert len(list((tmp_path / "via-env").glob("tree-*.dsv"))) == 1


def test_loop_writes_edges_and_profile(tmp_path):
    assert main(["loop", "--n", "80", "--out", str(tmp_path)]) == 0
    (edges,) = tmp_path.glob("loop-*-edges.csv")
    (profile,) = tmp_path.glob("loop-*-profile.csv")
    with open(profile, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["vertex", "loop_distance"]
    assert len(rows) == 81
    assert rows[1][1] == "0"  # the root is at distance zero
    stats_rec = {r["statistic"]: r["value"] for r in _jsonl(tmp_path / "loop.jsonl")}
    assert stats_rec["loop-vertices"] == 80
    assert stats_rec["loop-edges-simple"] >= 80


def test_trunk_positions_uniform_within_levels(tmp_path):
    assert main(["trunk", "--height", "3", "--count", "3000",
                 "--out", str(tmp_path)]) == 0
    (f,) = tmp_path.glob("trunk-*.csv")
    with open(f, newline="", encoding="utf-8") as g:
        rows = list(csv.reader(g))
    assert rows[0] == ["replicate", "level", "child_count", "spine_pos"]
    body = rows[1:]
    assert len(body) == 3 * 3000
    # conditioned on child count 3, the spine position is uniform on {1,2,3}
    pos = [int(r[3]) for r in body if r[2] == "3"]
    assert len(pos) > 800
    counts = [pos.count(1), pos.count(2), pos.count(3)]
    assert stats.chisquare(counts).pvalue > 1e-3
    leaves = {r["value"] for r in _jsonl(tmp_path / "trunk.jsonl")}
    assert all(v >= 1 for v in leaves)


def test_walk_emits_full_path(tmp_path):
    assert main(["walk", "--n", "60", "--out", str(tmp_path)]) == 0
    (f,) = tmp_path.glob("walk-*.csv")
    with open(f, newline="", encoding="utf-8") as g:
        rows = list(csv.reader(g))
    assert rows[0] == ["step", "value"]
    assert len(rows) == 62
    assert rows[1] == ["0", "0"]
    values = [int(r[1]) for r in rows[1:]]
    assert min(values[:60]) >= 0  # conditioned to stay nonnegative before n


def test_couple_reports_tv(tmp_path, capsys):
    rc = main(["couple", "--n", "30", "--replicates", "300", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "tv=" in out and "bias_note=" in out
    recs = {r["statistic"]: r["value"] for r in _jsonl(tmp_path / "couple.jsonl")}
    assert 0.0 <= recs["windowed-tv"] <= 2.0
    assert recs["windowed-tv-occupied"] <= 1024


def test_oracle_all_identities_pass(tmp_path, capsys):
    rc = main(["oracle", "--law", "binary", "--n", "5", "--draws", "200",
               "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("PASS oracle:") >= 4
    recs = {r["statistic"]: r for r in _jsonl(tmp_path / "oracle.jsonl")}
    # E[X*] equals 1 + sigma^2 exactly for the binary law
    assert recs["sizebias-mean-gap"]["value"] <= 1e-9
    assert recs["kemperman-discrepancy-max"]["value"] <= 1e-12


def test_oracle_skips_sizebias_for_subcritical(tmp_path, capsys):
    rc = main(["oracle", "--law", "heavytail", "--n", "4", "--draws", "10",
               "--out", str(tmp_path)])
    assert rc == 0
    assert "SKIP oracle: size-biased mean" in capsys.readouterr().out


def test_verify_with_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps({"experiment": "exact-identities", "ns": [6], "replicates": 300,
                    "seed": 2}),
        encoding="utf-8",
    )
    rc = main(["verify", "--config", str(cfg), "--out", str(tmp_path / "run")])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("PASS exact-identities:") == 3
    assert "FAIL" not in out
    recs = _jsonl(tmp_path / "run" / "exact-identities.jsonl")
    assert all(r["seed"] == 2 for r in recs)


def test_verify_seed_flag_overrides_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps({"experiment": "exact-identities", "ns": [6], "replicates": 100,
                    "seed": 2}),
        encoding="utf-8",
    )
    assert main(["verify", "--config", str(cfg), "--seed", "9",
                 "--out", str(tmp_path / "run")]) == 0
    recs = _jsonl(tmp_path / "run" / "exact-identities.jsonl")
    assert all(r["seed"] == 9 for r in recs)


def test_verify_unknown_suite_fails_cleanly(capsys):
    assert main(["verify", "--suite", "no-such-suite"]) == 2
    assert main(["verify"]) == 2
    err = capsys.readouterr().err
    assert "error" in err


def test_failing_threshold_gives_exit_one(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    # the measured discrepancy is exactly 0.0, so only a negative bar fails
    cfg.write_text(
        json.dumps({"experiment": "exact-identities", "ns": [6], "replicates": 100,
                    "thresholds": {"kemperman": -1.0}}),
        encoding="utf-8",
    )
    rc = main(["verify", "--config", str(cfg), "--out", str(tmp_path / "run")])
    assert rc == 1
    assert "FAIL exact-identities: kemperman" in capsys.readouterr().out


def test_trunk_rejects_subcritical_law(capsys, tmp_path):
    rc = main(["trunk", "--law", "heavytail", "--height", "3",
               "--out", str(tmp_path)])
    assert rc == 2
    assert "NotCritical" in capsys.readouterr().err


def test_module_invocation_help():
    proc = subprocess.run(
        [sys.executable, "-m", "looptrees.cli", "--help"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    for sub in ("sample-tree", "loop", "trunk", "walk", "couple", "verify", "oracle"):
        assert sub in proc.stdout
