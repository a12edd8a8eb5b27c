from __future__ import annotations

import dataclasses
import json

import numpy as np
import pytest

from evoclust import harness as hz
from evoclust.cli import main
from evoclust.geometry import Dataset, InputError, dump_instance
from evoclust.oracles import exact_partition_opt


def test_line_generator():
    ds = hz.generate_instance("line:4", seed=123)
    assert ds.points.ravel().tolist() == [0, 1, 10, 11]


def test_uniform_generator_deterministic():
    a = hz.generate_instance("uniform_square:16", seed=5)
    b = hz.generate_instance("uniform_square:16", seed=5)
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, hz.generate_instance("uniform_square:16", seed=6).points)


def test_blobs_have_cluster_structure():
    ds = hz.generate_instance("gaussian_blobs:12:3:0.05", seed=0)
    assert ds.n == 12
    three = exact_partition_opt(ds, 3, "kmeans_centroid").value
    one = float(((ds.points - ds.points.mean(axis=0)) ** 2).sum())
    assert three < one


@pytest.mark.parametrize("text", ["uniform_square", "nope:3", "gaussian_blobs:12", "line:x"])
def test_bad_generator(text):
    with pytest.raises(InputError):
        hz.generate_instance(text)


def test_ktmm_line_max_ratio_one():
    cfg = hz.ExperimentConfig("ktmm", 2, generator="line:4", trials=10, timing=False)
    records, summary = hz.run_trials(cfg)
    assert summary["max_ratio"] == 1.0
    assert all(r.opt == 1 for r in records)


def test_single_trial_summary():
    cfg = hz.ExperimentConfig("kmedian", 2, generator="line:4", trials=1, stop="local_opt", timing=False)
    (rec,), s = hz.run_trials(cfg)
    assert s["trials"] == 1 and s["max_ratio"] == rec.ratio
    assert s["mean_first_hit"] == s["max_first_hit"] == rec.first_hit


def test_kmedian_ratio_within_guarantee():
    cfg = hz.ExperimentConfig("kmedian", 3, generator="uniform_square:12", p=1, eps=0.1, trials=50,
                              stop="local_opt", timing=False)
    _, s = hz.run_trials(cfg)
    assert s["max_ratio"] <= 5 / 0.9


def test_parallel_matches_sequential():
    cfg = hz.ExperimentConfig("kmedian", 3, generator="uniform_square:10", trials=6, stop="local_opt",
                              timing=False)
    seq, _ = hz.run_trials(cfg)
    par, _ = hz.run_trials(dataclasses.replace(cfg, workers=3))
    assert hz.records_to_json(seq) == hz.records_to_json(par)


def _rec(**kw):
    base = dict(trial=0, seed=0, first_hit=5, cost=1.5, opt=1.0, ratio=1.5)
    base.update(kw)
    return hz.TrialRecord(**base)


def test_csv_one_record():
    text = hz.records_to_csv([_rec()])
    lines = text.strip().split("\n")
    assert len(lines) == 2
    assert lines[0] == ",".join(hz.CSV_COLUMNS)


def test_json_round_trip():
    recs = [_rec(), _rec(trial=1, first_hit=None, fairness_factor=float("inf"), output=[0, 2])]
    assert hz.records_from_json(hz.records_to_json(recs)) == recs


def test_ratio_blank_when_oracle_refused(tmp_path):
    path = tmp_path / "big.json"
    dump_instance(Dataset(np.random.default_rng(0).random((14, 2))), path)
    cfg = hz.ExperimentConfig("ktmm", 3, instance=str(path), trials=1, budget=200, timing=False)
    (rec,), _ = hz.run_trials(cfg)
    assert rec.oracle_refused and rec.ratio is None
    row = hz.records_to_csv([rec]).strip().split("\n")[1].split(",")
    assert row[hz.CSV_COLUMNS.index("ratio")] == ""


def test_export_formats(tmp_path):
    recs = [_rec()]
    assert hz.export(recs, tmp_path / "a.csv", "csv").read_text().startswith("trial,")
    assert json.loads(hz.export(recs, tmp_path / "a.json", "json").read_text())


def test_config_validation():
    with pytest.raises(InputError):
        hz.ExperimentConfig("ktmm", 2, trials=1)
    with pytest.raises(InputError):
        hz.ExperimentConfig("nope", 2, generator="line:4")


# -- CLI ----------------------------------------------------------------------

def test_cli_run(capsys):
    assert main(["run", "--generator", "line:4", "--formulation", "ktmm", "--k", "2", "--budget", "2000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["cost"] == 1 and len(out["output"]) == 2


def test_cli_run_trace(tmp_path):
    path = tmp_path / "trace.jsonl"
    assert main(["run", "--generator", "line:4", "--formulation", "kmedian", "--k", "2",
                 "--budget", "500", "--out", str(path)]) == 0
    first = json.loads(path.read_text().splitlines()[0])
    assert first["event"] == "init" and first["f1"] == "-inf"


def test_cli_oracle(capsys):
    assert main(["oracle", "--generator", "line:4", "--formulation", "kmedian", "--k", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["optimum"] == 2


def test_cli_fairness_audit(tmp_path, capsys):
    centers = tmp_path / "c.txt"
    centers.write_text("0 2\n")
    assert main(["fairness-audit", "--generator", "line:4", "--k", "2", "--centers", str(centers)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["violations"] == 0 and rep["fairness_factor"] == 1 and rep["balls"]["centers"] == [0, 2]


def test_cli_sweep(capsys):
    assert main(["sweep", "--formulation", "kmedian", "--n", "6", "--k-values", "2", "--trials", "2",
                 "--stop", "local_opt"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0].startswith("n,k,trials") and len(lines) == 2


def test_cli_verify_small(capsys):
    assert main(["verify", "t3", "--trials", "3"]) == 0
    assert capsys.readouterr().out.startswith("PASS")


@pytest.mark.parametrize("argv", [
    ["run", "--generator", "line:4", "--k", "9"],
    ["run", "--instance", "/nonexistent/file.json"],
    ["oracle", "--generator", "bogus:3"],
])
def test_cli_input_errors(argv, capsys):
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err
