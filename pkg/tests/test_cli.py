import json
import subprocess
import sys

import pytest

from cdrl.cli import main
from cdrl.experiments import REGISTRY, chain_mdp
from cdrl.mdp import mdp_to_dict


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in REGISTRY:
        assert name in out


def test_run_passing_experiment(capsys):
    assert main(["run", "lemma2_counterexample"]) == 0
    out = capsys.readouterr().out
    assert "PASS  lemma2_counterexample.strict_expansion" in out
    assert "FAIL" not in out


def test_run_failing_verdict_exits_one(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "convergence_thm1", "n_steps": 5, "n_seeds": 1}))
    assert main(["run", "convergence_thm1", "--config", str(cfg)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_run_writes_csv(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "convergence_thm1", "n_steps": 100, "n_seeds": 2}))
    out = tmp_path / "trace.csv"
    main(["run", "convergence_thm1", "--config", str(cfg), "--seed", "4", "--out", str(out), "--format", "csv"])
    lines = out.read_text().splitlines()
    assert lines[0] == "experiment,seed,t,metric,value"
    assert {line.split(",")[1] for line in lines[1:]} == {"4", "5"}


def test_seed_override_reaches_report(tmp_path):
    out = tmp_path / "r.json"
    main(["run", "pythagoras_lemma3", "--seed", "11", "--out", str(out)])
    assert json.loads(out.read_text())["config"]["seed"] == 11


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "no_such_experiment"],
        ["run", "bound_prop3", "--config", "/nonexistent/config.json"],
    ],
)
def test_parameter_errors_exit_two(argv, capsys):
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_config_name_must_match(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "bound_prop4"}))
    assert main(["run", "bound_prop3", "--config", str(cfg)]) == 2


def test_validate_mdp(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(mdp_to_dict(chain_mdp())))
    assert main(["validate-mdp", str(good)]) == 0
    assert "ok" in capsys.readouterr().out

    doc = mdp_to_dict(chain_mdp())
    doc["kernel"][0][0][0]["p"] = 0.5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate-mdp", str(bad)]) == 1
    assert main(["validate-mdp", str(tmp_path / "missing.json")]) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cdrl.cli", "list"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "sandwich_lemma5" in proc.stdout
