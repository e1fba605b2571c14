import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from seqsample import corpus
from seqsample.cli import Options, main, parse_config, run


def pennies_config(**extra):
    return dict({"game": corpus.matching_pennies().to_json(), "costs": 0.05}, **extra)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_solve_writes_equilibrium(tmp_path):
    code, summary, files = run("solve", pennies_config(), str(tmp_path))
    assert code == 0 and summary["schema_version"] == 1
    doc = json.loads((tmp_path / "equilibrium.json").read_text())
    assert doc["sigma"]["Matcher"] == pytest.approx([0.5, 0.5])
    assert read_csv(tmp_path / "action_time_Clasher.csv")[0] == ["action", "t", "prob"]


def test_malformed_payoffs_exit_two_without_files(tmp_path):
    cfg = pennies_config()
    cfg["game"]["payoffs"]["Matcher"] = [[1, 0, 0]]
    out = tmp_path / "out"
    code, summary, files = run("solve", cfg, str(out))
    assert code == 2
    assert summary["path"] == "/game/payoffs/Matcher"
    assert not out.exists()


@pytest.mark.parametrize("mutate, path", [
    (lambda c: c.update(costs="cheap"), "/costs"),
    (lambda c: c.update(stopping_rule="lazy"), "/stopping_rule"),
    (lambda c: c.update(priors={"Matcher": {"type": "dirichlet", "alpha": [1, 1, 1]}}), "/priors/Matcher"),
    (lambda c: c.update(params={"cost_grid": [0.01, 0.1]}), "/params/cost_grid"),
    (lambda c: c.update(extra=1), "/"),
])
def test_schema_errors_point_at_offender(tmp_path, mutate, path):
    cfg = pennies_config()
    mutate(cfg)
    code, summary, _ = run("sweep-costs", cfg, str(tmp_path / "x"))
    assert code == 2
    assert summary["path"] == path
    assert not (tmp_path / "x").exists()


def test_boundaries_file_satisfies_collapse(tmp_path):
    code, _, _ = run("boundaries", pennies_config(params={"player": "Clasher"}), str(tmp_path))
    rows = read_csv(tmp_path / "boundaries_Clasher.csv")
    assert code == 0 and rows[0] == ["t", "lower", "upper"]
    lower = np.array([float(r[1]) for r in rows[1:]])
    upper = np.array([float(r[2]) for r in rows[1:]])
    assert np.all(np.diff(upper) <= 0) and np.all(np.diff(lower) >= 0)
    assert lower[-1] == upper[-1] == 0.5


def test_config_round_trip(tmp_path):
    run("solve", pennies_config(priors={"Clasher": {"type": "dirichlet", "alpha": [1, 2.5]}}), str(tmp_path / "a"))
    echoed = json.loads((tmp_path / "a" / "config.json").read_text())
    assert parse_config(echoed).canonical() == echoed
    run("solve", echoed, str(tmp_path / "b"))
    assert (tmp_path / "a" / "equilibrium.json").read_bytes() == (tmp_path / "b" / "equilibrium.json").read_bytes()


def test_csv_floats_round_trip_exactly(tmp_path):
    from seqsample.stopping import StoppingProblem, boundaries
    from seqsample.belief import DirichletPrior
    run("boundaries", pennies_config(costs=0.02, params={"player": "Clasher"}), str(tmp_path))
    rows = read_csv(tmp_path / "boundaries_Clasher.csv")[1:]
    expected = boundaries(StoppingProblem.from_game(corpus.matching_pennies(), "Clasher",
                                                    DirichletPrior.beta(1, 1), 0.02))
    assert [float(r[2]) for r in rows] == expected.upper.tolist()
    assert [float(r[1]) for r in rows] == expected.lower.tolist()


def test_check_suite_exits_zero(tmp_path):
    code, summary, _ = run("check", pennies_config(), str(tmp_path))
    assert code == 0 and summary["result"]["failed"] == []


def test_nonconvergence_exits_one(tmp_path):
    cfg = {"game": corpus.rock_paper_scissors().to_json(), "costs": 0.1, "params": {"max_iter": 1, "warm_start": {"Row": [0.8, 0.1, 0.1], "Col": [0.1, 0.1, 0.8]}}}
    code, summary, _ = run("solve", cfg, str(tmp_path))
    assert code == 1
    assert summary["result"]["status"] == "max_iter"


def test_misspec_command(tmp_path):
    cfg = {"game": corpus.misspecified_sampler().to_json(), "costs": 0.05,
           "priors": {"P": {"type": "finite", "atoms": [["1/2", "1/6", "1/3"], ["1/6", "1/2", "1/3"]],
                            "weights": ["1/2", "1/2"]}},
           "params": {"player": "P", "true_sigma": [0, 0, 1]}}
    code, summary, _ = run("misspec", cfg, str(tmp_path))
    assert code == 0 and summary["result"]["never_stop"] == 1.0


def test_dynamics_deterministic_with_seed(tmp_path):
    cfg = pennies_config(params={"variant": "finite_population", "steps": 40,
                                 "sigma0": {"Matcher": [0.9, 0.1], "Clasher": [0.2, 0.8]}})
    run("dynamics", cfg, str(tmp_path / "a"), Options(seed=11))
    run("dynamics", cfg, str(tmp_path / "b"), Options(seed=11))
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_main_prints_single_summary_line(tmp_path, capsys, monkeypatch):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(pennies_config()))
    monkeypatch.setenv("SEQSAMPLE_OUT", str(tmp_path / "env_out"))
    assert main(["solve", "--config", str(path)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["schema_version"] == 1
    assert (tmp_path / "env_out" / "equilibrium.json").exists()


def test_console_script_entry(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    proc = subprocess.run([sys.executable, "-m", "seqsample.cli", "solve", "--config", str(path),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stdout)["status"] == "schema_error"
    assert not os.path.exists(tmp_path / "o")
