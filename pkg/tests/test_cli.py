import json
import os

import numpy as np
import pytest

import capital as cp
from capital.cli import main


def run(args):
    return main([str(a) for a in args])


def test_simulate_writes_rows_and_manifest(tmp_path):
    out = tmp_path / "d.csv"
    code = run(["simulate", "--scenario", 1, "--n", 100, "--seed", 7, "--out", out])
    assert code == 0
    assert len(out.read_text().strip().splitlines()) == 101
    manifest = json.loads((tmp_path / "d.csv.manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 7
    assert str(out) in manifest["artifacts"] or "d.csv" in manifest["artifacts"][0]


def test_manifest_replay_is_byte_exact(tmp_path):
    out = tmp_path / "d.csv"
    assert run(["simulate", "--scenario", 2, "--n", 80, "--seed", 9, "--out", out]) == 0
    first = out.read_bytes()
    manifest = json.loads((tmp_path / "d.csv.manifest.json").read_text())
    assert main(manifest["argv"]) == 0
    assert out.read_bytes() == first


def test_fit_evaluate_round_trip(tmp_path):
    data = tmp_path / "d.csv"
    tree = tmp_path / "tree.json"
    audit = tmp_path / "audit.json"
    assert run(["simulate", "--scenario", 1, "--n", 250, "--seed", 3, "--out", data]) == 0
    assert run(["fit", "--data", data, "--delta", 1.0, "--reward", 1,
                "--trees", 60, "--seed", 5, "--out", tree, "--audit", audit]) == 0
    doc = json.loads(tree.read_text())
    assert doc["depth"] == 2
    audit_doc = json.loads(audit.read_text())
    assert len(audit_doc["c_hat"]) == 250
    assert audit_doc["reward_kind"] == "sign"
    assert run(["evaluate", "--tree", tree, "--test", data,
                "--eta-source", "analytic", "--delta", 1.0]) == 0


def test_fit_replay_reproduces_tree(tmp_path):
    data = tmp_path / "d.csv"
    tree = tmp_path / "t.json"
    run(["simulate", "--scenario", 1, "--n", 150, "--seed", 1, "--out", data])
    assert run(["fit", "--data", data, "--delta", 1.0, "--trees", 40,
                "--seed", 2, "--out", tree]) == 0
    first = tree.read_bytes()
    manifest = json.loads((tmp_path / "t.json.manifest.json").read_text())
    assert main(manifest["argv"]) == 0
    assert tree.read_bytes() == first


def test_exit_code_validation_error(tmp_path):
    data = tmp_path / "d.csv"
    run(["simulate", "--scenario", 1, "--n", 60, "--seed", 1, "--out", data])
    # survival flag on trial data is a validation failure
    assert run(["fit", "--data", data, "--delta", 1.0, "--rmst",
                "--seed", 1, "--out", tmp_path / "t.json"]) == 2
    # malformed CSV
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,a,y\n1,0,oops\n")
    assert run(["fit", "--data", bad, "--delta", 1.0, "--seed", 1,
                "--out", tmp_path / "t.json"]) == 2


def test_exit_code_infeasible(tmp_path):
    data = tmp_path / "d.csv"
    run(["simulate", "--scenario", 1, "--n", 120, "--seed", 4, "--out", data])
    assert run(["fit", "--data", data, "--delta", 99, "--trees", 30,
                "--seed", 1, "--out", tmp_path / "t.json"]) == 4


def test_exit_code_io_error(tmp_path):
    assert run(["simulate", "--scenario", 1, "--n", 50, "--seed", 1,
                "--out", tmp_path / "missing_dir" / "d.csv"]) == 3


def test_unknown_flag_rejected(tmp_path):
    assert run(["simulate", "--scenario", 1, "--n", 50, "--seed", 1,
                "--out", tmp_path / "d.csv", "--frobnicate"]) == 2


def test_seed_is_mandatory(tmp_path):
    assert run(["simulate", "--scenario", 1, "--n", 50,
                "--out", tmp_path / "d.csv"]) == 2


def test_baseline_command(tmp_path):
    data = tmp_path / "d.csv"
    run(["simulate", "--scenario", 1, "--n", 200, "--seed", 6, "--out", data])
    out = tmp_path / "vt.json"
    assert run(["baseline", "--method", "vt-c", "--data", data, "--delta", 1.0,
                "--trees", 40, "--seed", 2, "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["selected"]) == 200
    out2 = tmp_path / "adj.json"
    assert run(["baseline", "--method", "adj-y", "--data", data, "--delta", 1.0,
                "--seed", 2, "--out", out2]) == 0
    assert "node" in json.loads(out2.read_text())


def test_survival_fit_via_cli(tmp_path):
    data = tmp_path / "s.csv"
    assert run(["simulate", "--scenario", 4, "--n", 250, "--seed", 8,
                "--noise", "normal", "--censor", 0.15, "--out", data]) == 0
    tree = tmp_path / "t.json"
    assert run(["fit", "--data", data, "--delta", 1.0, "--reward", 2, "--rmst",
                "--trees", 40, "--seed", 3, "--out", tree]) == 0
    assert run(["evaluate", "--tree", tree, "--test", data,
                "--eta-source", "mc", "--delta", 1.0]) == 0


def test_benchmark_cli_and_replay(tmp_path):
    out = tmp_path / "table.csv"
    args = ["benchmark", "--scenario", 1, "--n", 120, "--delta", 1.0,
            "--reps", 2, "--trees", 25, "--test-size", 800, "--threads", 1,
            "--seed", 13, "--out", out]
    assert run(args) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "metric,mean,sd,n_reps,failed"
    assert any(line.startswith("proportion,") for line in lines)
    first = out.read_bytes()
    manifest = json.loads((tmp_path / "table.csv.manifest.json").read_text())
    assert main(manifest["argv"]) == 0
    assert out.read_bytes() == first
