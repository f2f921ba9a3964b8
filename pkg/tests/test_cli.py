import json
import subprocess
import sys

import pytest

from bias_lab.cli import build_parser, main
from bias_lab.data import Dataset
from bias_lab.nn import TrainedModel


def run(*argv):
    return main([str(a) for a in argv])


def test_sample_inject_train_pipeline(tmp_path, capsys):
    cfg = tmp_path / "scm.json"
    cfg.write_text(json.dumps({"family": "gaussian", "separability_strength": 0.5}))
    assert run("sample", "--config", cfg, "--n", 300, "--seed", 1, "--out", tmp_path / "tr") == 0
    assert run("sample", "--config", cfg, "--n", 150, "--seed", 2, "--out", tmp_path / "va") == 0
    tr = Dataset.load(tmp_path / "tr")
    assert len(tr) == 300 and tr.provenance["config"]["separability_strength"] == 0.5

    assert run("inject", "--in", tmp_path / "tr", "--kind", "annotation", "--rate", 1.0,
               "--out", tmp_path / "tr_biased") == 0
    biased = Dataset.load(tmp_path / "tr_biased")
    assert biased.injection_history[0]["kind"] == "annotation"

    tcfg = tmp_path / "train.json"
    tcfg.write_text(json.dumps({"max_epochs": 2, "architecture": {"layer_widths": [6, 8, 4]}}))
    assert run("train", "--method", "frl", "--train", tmp_path / "tr_biased", "--val", tmp_path / "va",
               "--config", tcfg, "--seed", 3, "--out", tmp_path / "m.json") == 0
    model = TrainedModel.load(tmp_path / "m.json")
    assert model.config.seed == 3 and model.config.method.value == "frl"
    assert "stopped at epoch" in capsys.readouterr().out
    tcfg.write_text(json.dumps({"architecture": {"layer_widths": [9, 4]}}))
    assert run("train", "--method", "erm", "--train", tmp_path / "tr", "--val", tmp_path / "va",
               "--config", tcfg, "--out", tmp_path / "m2.json") == 2


def test_grid_and_report(tmp_path, capsys):
    spec = tmp_path / "grid.json"
    spec.write_text(json.dumps({
        "suite": "shift", "base_scm": {"family": "gaussian"}, "separability_levels": [0.2, 0.8],
        "mechanisms": ["annotation"], "methods": ["erm", "frl"], "seeds": [0],
        "n_train": 200, "n_val": 100, "n_test": 200, "train": {"max_epochs": 2, "adversary_steps": 1},
        "separability_seeds": [0],
    }))
    out = tmp_path / "g"
    assert run("grid", "--spec", spec, "--out", out) == 0
    assert "8 rows" in capsys.readouterr().out
    assert run("report", out, "--svg") == 0
    assert (out / "report" / "summary.md").exists()
    assert "kendall tau" in capsys.readouterr().out


def test_verify_lemmas(tmp_path):
    cfg = tmp_path / "v.json"
    cfg.write_text(json.dumps({"n_train": 400, "n_val": 200, "n_test": 400, "seeds": [0]}))
    code = run("verify", "--suite", "lemmas", "--config", cfg, "--out", tmp_path / "r.json")
    rep = json.loads((tmp_path / "r.json").read_text())
    assert code in (0, 1) and rep["checks"]


def test_bad_inputs_exit_2(tmp_path, capsys):
    assert run("sample", "--n", 10, "--out", tmp_path / "x", "--mechanism", "nope") == 2
    assert run("inject", "--in", tmp_path / "missing", "--kind", "annotation", "--out", tmp_path / "y") == 2
    assert "bias-lab" in capsys.readouterr().err
    spec = tmp_path / "bad.json"
    spec.write_text(json.dumps({"separability_levels": [0.1], "methods": ["frl"]}))
    assert run("grid", "--spec", spec, "--out", tmp_path / "o") == 2


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "bias_lab.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("sample", "inject", "train", "verify", "grid", "report"):
        assert cmd in out.stdout
