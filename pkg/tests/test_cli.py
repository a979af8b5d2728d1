import json
from pathlib import Path

import pytest

from nonlocal_bellman.cli import run

CONFIGS = Path(__file__).resolve().parent.parent / "demos" / "configs"


def _report(out):
    return json.loads((out / "report.json").read_text())


def test_eval_constant_is_zero(tmp_path):
    out = tmp_path / "eval"
    assert run(["eval", "--config", str(CONFIGS / "eval_constant.json"), "--out", str(out)]) == 0
    rep = _report(out)
    assert rep["seed"] == 0 and rep["config"]["operator"] == "Fs"
    assert all(abs(e["value"]) < 1e-12 for e in rep["result"]["evaluations"])
    header = (out / "evaluations.csv").read_text().splitlines()[0]
    assert "[length]" in header


def test_malformed_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"problem": {"h": 0.1,,}}')
    assert run(["solve", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line 1" in capsys.readouterr().err


def test_invalid_field_exits_2(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "solve_ball.json").read_text())
    cfg["problem"]["config"]["s"] = 1.2
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    assert run(["solve", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "problem.config" in capsys.readouterr().err


def _small_solve(tmp_path, **changes):
    cfg = json.loads((CONFIGS / "solve_ball.json").read_text())
    cfg["problem"]["h"] = 0.1
    cfg.update(changes)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_solve_writes_solution_and_is_deterministic(tmp_path):
    p = _small_solve(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["solve", "--config", str(p), "--out", str(a), "--seed", "7"]) == 0
    assert run(["solve", "--config", str(p), "--out", str(b), "--seed", "7"]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "solution.csv").read_bytes() == (b / "solution.csv").read_bytes()
    rep = _report(a)
    assert rep["result"]["solve"]["converged"] and rep["seed"] == 7
    assert rep["config"]["problem"]["config"]["c_ns"] > 0  # resolved defaults embedded


def test_nonconvergence_exits_3_with_report(tmp_path):
    cfg = json.loads((CONFIGS / "solve_ball.json").read_text())
    cfg["problem"].update(h=0.1, f={"kind": "exponential", "kappa": 1.0})
    cfg["solver"] = {"tol": 1e-12, "max_iter": 1}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    assert run(["solve", "--config", str(p), "--out", str(out)]) == 3
    assert _report(out)["status"] == "not_converged"


def test_diagnose_radial_json_format(tmp_path):
    p = _small_solve(tmp_path)
    out = tmp_path / "o"
    assert run(["diagnose", "radial", "--config", str(p), "--out", str(out), "--format", "json"]) == 0
    rep = _report(out)
    assert "radial" in rep["tables"] and rep["mode"] == "radial"
    assert not (out / "radial.csv").exists()


def test_controls_and_oracle(tmp_path):
    assert run(["controls", "--config", str(CONFIGS / "controls.json"), "--out", str(tmp_path / "c")]) == 0
    assert _report(tmp_path / "c")["result"]["size"] == 165
    assert run(["oracle", "--config", str(CONFIGS / "oracle_gaussian.json"), "--out", str(tmp_path / "o")]) == 0
    v = _report(tmp_path / "o")["result"]["evaluations"][0]["value"]
    assert v == pytest.approx(1.7724538509, rel=1e-9)


def test_acceptance_subset_and_mutation(tmp_path):
    assert run(["acceptance", "--criteria", "5", "--out", str(tmp_path / "a")]) == 0
    assert run(["acceptance", "--criteria", "1", "--mutation", "c_ns_double",
                "--out", str(tmp_path / "m")]) == 1
