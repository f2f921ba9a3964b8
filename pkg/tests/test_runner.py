import json

import numpy as np
import pytest

from bias_lab import runner
from bias_lab.runner import (
    CSV_COLUMNS, GridError, GridSpec, cell_data, default_grid, read_csv, report, run_grid, summarize,
)

TINY_TRAIN = {"lr": 1e-3, "max_epochs": 2, "adversary_steps": 2}


def tiny_spec(**kw):
    d = {
        "suite": "shift",
        "base_scm": {"family": "gaussian"},
        "separability_levels": [0.2, 0.8],
        "mechanisms": ["presentation", "prevalence", "annotation"],
        "methods": ["erm", "frl"],
        "seeds": [0, 1, 2, 3, 4],
        "n_train": 200, "n_val": 100, "n_test": 200,
        "train": TINY_TRAIN,
        "separability_seeds": [0],
    }
    d.update(kw)
    return GridSpec.from_dict(d)


def write_rows(path, rows):
    path.mkdir(parents=True, exist_ok=True)
    full = [{c: r.get(c, 0) for c in CSV_COLUMNS} for r in rows]
    (path / "results.csv").write_text(runner._csv_text(CSV_COLUMNS, full))


def test_grid_cardinality_and_rerun(tmp_path):
    spec = tiny_spec()
    res = run_grid(spec, tmp_path, separability=False)
    assert res.ok
    assert len(spec.cells()) * len(spec.methods) == 60
    assert len(res.rows) == 120
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["rows"] == manifest["expected_rows"] == 120
    first = (tmp_path / "results.csv").read_bytes()
    again = run_grid(spec, tmp_path, separability=False)
    assert again.n_trained_cells == 0
    assert (tmp_path / "results.csv").read_bytes() == first
    header = first.decode().splitlines()[0].split(",")
    assert header == CSV_COLUMNS


def test_resume_after_interruption(tmp_path):
    spec = tiny_spec(seeds=[0, 1], mechanisms=["annotation"])
    full = run_grid(spec, tmp_path / "full", separability=False)
    run_grid(spec, tmp_path / "part", separability=False)
    victim = sorted((tmp_path / "part" / "cells").glob("*.json"))[1]
    victim.unlink()
    res = run_grid(spec, tmp_path / "part", separability=False)
    assert res.n_trained_cells == 1
    assert (tmp_path / "part" / "results.csv").read_bytes() == (tmp_path / "full" / "results.csv").read_bytes()
    assert full.ok


def test_parallel_workers_match_serial(tmp_path):
    spec = tiny_spec(seeds=[0, 1], mechanisms=["prevalence"], separability_levels=[0.5])
    run_grid(spec, tmp_path / "a", workers=1)
    run_grid(spec, tmp_path / "b", workers=2)
    for name in ("results.csv", "separability.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_digest_mismatch_rejected(tmp_path):
    run_grid(tiny_spec(seeds=[0], mechanisms=["annotation"], separability_levels=[0.5]), tmp_path, separability=False)
    with pytest.raises(GridError):
        run_grid(tiny_spec(seeds=[1], mechanisms=["annotation"], separability_levels=[0.5]), tmp_path)


def test_failed_cells_are_recorded(tmp_path, monkeypatch):
    spec = tiny_spec(seeds=[0, 1], mechanisms=["annotation"], separability_levels=[0.5])
    real = runner.run_cell

    def flaky(spec, index, mechanism, seed):
        if seed == 1:
            raise RuntimeError("boom")
        return real(spec, index, mechanism, seed)

    monkeypatch.setattr(runner, "run_cell", flaky)
    res = run_grid(spec, tmp_path, separability=False)
    assert not res.ok
    assert list(res.failed) == ["d00__annotation__seed1"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["rows"] == 4 and manifest["expected_rows"] == 8
    assert "boom" in manifest["failed_cells"]["d00__annotation__seed1"]


def test_test_data_is_always_unbiased():
    spec = tiny_spec(seeds=[0])
    for route in ("native", "inject"):
        s = tiny_spec(seeds=[0], route=route)
        for idx, mech, seed in s.cells():
            tr, va, te, _ = cell_data(s, idx, mech, seed)
            assert te.provenance["config"]["mechanism"] == "unbiased"
            assert te.injection_history == []
            if route == "native":
                assert tr.provenance["config"]["mechanism"] == mech
            else:
                assert tr.injection_history[0]["kind"] == mech
    assert spec.suite == "shift"


def test_spec_validation():
    with pytest.raises(GridError):
        tiny_spec(methods=["frl"])
    with pytest.raises(GridError):
        tiny_spec(mechanisms=["collider"])
    with pytest.raises(GridError):
        tiny_spec(suite="iid")
    with pytest.raises(GridError):
        GridSpec.from_dict({"separability_levels": [0.1], "bogus": 1})
    with pytest.raises(GridError):
        tiny_spec(route="inject", mechanisms=["causal_annotation"])


def test_spec_round_trip_and_defaults():
    spec = tiny_spec()
    assert GridSpec.from_dict(spec.to_dict()).digest() == spec.digest()
    g = default_grid("iid")
    assert [c.separability_strength for c in g.scm_configs] == [0.1, 0.4, 0.8]
    assert (g.n_train, g.n_val, g.n_test, len(g.seeds)) == (8000, 2000, 10000, 5)


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BIAS_LAB_OUT", str(tmp_path / "env"))
    spec = tiny_spec(seeds=[0], mechanisms=["annotation"], separability_levels=[0.5])
    res = run_grid(spec, None, separability=False)
    assert res.out_dir == tmp_path / "env" and (tmp_path / "env" / "results.csv").exists()
    monkeypatch.delenv("BIAS_LAB_OUT")
    with pytest.raises(GridError):
        run_grid(spec, None)


def test_four_row_fixture_summary(tmp_path):
    rows = [
        dict(dataset_id="d00", mechanism="annotation", separability_s=0.5, method="frl", seed=0, group=0, delta_acc_pp=1.0),
        dict(dataset_id="d00", mechanism="annotation", separability_s=0.5, method="frl", seed=1, group=0, delta_acc_pp=3.0),
        dict(dataset_id="d00", mechanism="annotation", separability_s=0.5, method="frl", seed=0, group=1, delta_acc_pp=-2.0),
        dict(dataset_id="d00", mechanism="annotation", separability_s=0.5, method="frl", seed=1, group=1, delta_acc_pp=4.0),
    ]
    write_rows(tmp_path, rows)
    table = summarize(read_csv(tmp_path / "results.csv"))["table"]
    g0 = next(e for e in table if e["group"] == 0)
    g1 = next(e for e in table if e["group"] == 1)
    assert (g0["mean_delta_pp"], g0["sd_delta_pp"], g0["n"]) == (2.0, pytest.approx(2 ** 0.5), 2)
    assert (g1["mean_delta_pp"], g1["sd_delta_pp"]) == (1.0, pytest.approx(18 ** 0.5))


def test_monotone_fixture_tau_one(tmp_path):
    rows = []
    for i, s in enumerate([0.1, 0.3, 0.5, 0.7]):
        for g in (0, 1):
            rows.append(dict(dataset_id=f"d{i:02d}", mechanism="presentation", separability_s=s, method="frl",
                             seed=0, group=g, delta_acc_pp=float(i)))
    write_rows(tmp_path, rows)
    assoc = summarize(read_csv(tmp_path / "results.csv"))["association"]["frl"]
    assert assoc["tau"] == 1.0


def test_lambda_zero_frl_gives_zero_deltas_and_undefined_tau(tmp_path):
    spec = tiny_spec(seeds=[0, 1], mechanisms=["annotation"], separability_levels=[0.2, 0.5, 0.8],
                     train={**TINY_TRAIN, "adversarial_coefficient": 0.0})
    run_grid(spec, tmp_path, separability=False)
    rows = read_csv(tmp_path / "results.csv")
    assert all(r["delta_acc_pp"] == 0.0 for r in rows)
    summary = report(tmp_path)
    assert summary["association"]["frl"]["tau"] is None
    assert "constant" in summary["association"]["frl"]["error"]


def test_report_outputs_deterministic(tmp_path):
    spec = tiny_spec(seeds=[0, 1], mechanisms=["presentation"], separability_levels=[0.2, 0.5, 0.8])
    run_grid(spec, tmp_path)
    report(tmp_path, svg=True)
    first = {p.name: p.read_bytes() for p in (tmp_path / "report").iterdir()}
    report(tmp_path, svg=True)
    second = {p.name: p.read_bytes() for p in (tmp_path / "report").iterdir()}
    assert first == second
    assert set(first) == {"report.json", "summary.md", "association_frl.svg"}
    assert b"native route" in first["summary.md"]
    sep = read_csv(tmp_path / "separability.csv")
    assert [r["dataset_id"] for r in sep] == ["d00", "d01", "d02"]
    assert all(0.5 <= r["oracle_auc"] <= 1 for r in sep)
