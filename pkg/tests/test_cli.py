from __future__ import annotations

import json
from pathlib import Path

import pytest

import acdsim
from acdsim.cli import main

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "acdsim" / "scenarios"


def test_validate_ok_exit_zero(capsys):
    assert main(["validate", str(SCENARIOS / "mvp_2host.yaml")]) == 0
    assert "OK" in capsys.readouterr().out


def test_validate_broken_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(acdsim.scenario_text("mvp-2host").replace("role: workstation", "role: toaster"))
    assert main(["validate", str(bad)]) == 1
    assert "role" in capsys.readouterr().err


def test_missing_file_exit_nonzero(capsys):
    assert main(["validate", "/nonexistent/file.yaml"]) == 1


def test_run_writes_csv_and_summary(tmp_path, capsys):
    out = tmp_path / "episodes.csv"
    summary = tmp_path / "summary.json"
    code = main(["run", str(SCENARIOS / "no_red.yaml"), "--policy", "heuristic",
                 "--seeds", "1,2", "--episodes", "2",
                 "--out", str(out), "--summary", str(summary)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("seed,episode,env_seed,return")
    assert len(lines) == 5
    doc = json.loads(summary.read_text())
    assert doc["scenario_name"] == "no-red"
    assert "action_distribution" in doc


def test_run_scripted_policy(tmp_path):
    script = tmp_path / "script.json"
    script.write_text(json.dumps(["pass"] * 30))
    code = main(["run", str(SCENARIOS / "no_red.yaml"), "--policy",
                 f"scripted:{script}", "--seeds", "3", "--episodes", "1"])
    assert code == 0


def test_train_then_eval_flow(tmp_path, capsys):
    table_path = tmp_path / "qtable.tsv"
    code = main(["train", str(SCENARIOS / "mvp_2host_oracle.yaml"),
                 "--algo", "q", "--params", "episodes=1500,seed=1",
                 "--out", str(table_path)])
    assert code == 0
    assert table_path.exists()
    code = main(["eval", str(SCENARIOS / "mvp_2host_oracle.yaml"),
                 "--qtable", str(table_path), "--baseline", "random",
                 "--seeds", "0,1,2", "--episodes", "5",
                 "--out", str(tmp_path / "report.csv")])
    assert code == 0
    out = capsys.readouterr().out
    assert "policy comparison" in out
    assert (tmp_path / "report.csv").exists()


def test_serve_refuses_oracle_without_flag(capsys):
    code = main(["serve", str(SCENARIOS / "mvp_2host_oracle.yaml"),
                 "--transport", "tcp:0"])
    assert code == 1
    assert "omniscient_oracle" in capsys.readouterr().err


def test_unknown_transport_errors(capsys):
    code = main(["serve", str(SCENARIOS / "mvp_2host.yaml"), "--transport", "carrier-pigeon"])
    assert code == 1
