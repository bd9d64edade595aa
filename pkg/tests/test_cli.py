import json

import pytest

from ergofit.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, main


def write(tmp_path, raw, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps({"schema_version": 1, **raw}))
    return str(p)


def test_list_experiments(capsys):
    assert main(["--list-experiments"]) == EXIT_PASS
    out = capsys.readouterr().out
    assert "sudakov" in out and "C11" in out


def test_passing_run_writes_report(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "auxiliary_loss", "params": {"mc_samples": 20000}})
    out = tmp_path / "o"
    assert main(["--config", cfg, "--out", str(out), "--seed", "4"]) == EXIT_PASS
    assert "C7: PASS" in capsys.readouterr().out
    rep = json.loads((out / "report.json").read_text())
    assert rep["seeds"] == [4]
    assert (out / "absolute.csv").exists()


def test_failing_verdict_exit_code(tmp_path):
    cfg = write(tmp_path, {"experiment": "entropy_equality", "grid": {"x_points": 2000}, "horizons": [4, 6],
                           "p": ["inf", 2]})
    assert main(["--config", cfg, "--out", str(tmp_path / "o"), "-q"]) == EXIT_FAIL


@pytest.mark.parametrize("raw", [
    {"experiment": "auxiliary_loss", "sigma0_override": 1.0},
    {"experiment": "auxiliary_loss", "params": {"sigma0_override": 1.0}},
    {"experiment": "mean_width", "family": {"id": "logistic", "args": {"a_hi": 5.0}}},
])
def test_config_errors(tmp_path, raw, capsys):
    assert main(["--config", write(tmp_path, raw), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "config" in capsys.readouterr().err


def test_missing_config_and_bad_flags(tmp_path):
    assert main([]) == EXIT_CONFIG
    assert main(["--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    cfg = write(tmp_path, {"experiment": "auxiliary_loss"})
    assert main(["--config", cfg, "--threads", "0"]) == EXIT_CONFIG
    assert main(["--config", cfg, "--seed", "-1"]) == EXIT_CONFIG


def test_budget_exit_code_keeps_partial_report(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "entropy_equality", "grid": {"x_points": 2000}, "horizons": [4, 6],
                           "budget": {"max_cells": 10}})
    out = tmp_path / "o"
    assert main(["--config", cfg, "--out", str(out)]) == EXIT_BUDGET
    assert json.loads((out / "report.json").read_text())["status"] == "partial"
    assert "partial" in capsys.readouterr().err


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write(tmp_path, {"experiment": "auxiliary_loss", "params": {"mc_samples": 1000}})
    assert main(["--config", cfg, "--out", str(blocker / "sub")]) == EXIT_BUDGET
