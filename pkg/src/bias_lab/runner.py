"""Experiment grid: sample or inject bias, train every method, evaluate on unbiased test data.

Layout of an output directory::

    manifest.json        spec, completed cells, failures
    cells/<key>.json     one file per (dataset, mechanism, seed) cell, written atomically
    results.csv          assembled rows, one per (cell, method, group)
    separability.csv     measured attribute-classifier AUC per dataset
    report/              summary.md, report.json, optional SVG plots

Reruns skip cells whose file exists, so an interrupted grid resumes where it
stopped and a finished grid is rebuilt byte for byte.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import hashlib
import io
import json
import math
import os
import tempfile
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import metrics
from .data import Dataset
from .inject import InjectionSpec, apply_injection
from .nn import Method, TrainConfig, extract_representations, predict_dataset, train
from .rng import derive_seed
from .scm import Family, Mechanism, Scm, ScmConfig, oracle_cmi, oracle_separability

CSV_COLUMNS = [
    "dataset_id", "mechanism", "separability_s", "method", "seed", "group",
    "accuracy", "auc", "delta_acc_pp", "probe_auc", "mi_a_r", "mi_y_r", "cmi",
]
SEPARABILITY_COLUMNS = ["dataset_id", "separability_s", "oracle_auc", "measured_auc", "measured_sd", "n_seeds"]

ENV_OUT = "BIAS_LAB_OUT"
INJECTABLE = ("presentation", "prevalence", "annotation")

# Strengths mirror removing or relabelling half of the Group-1 positives at
# base rate 0.5: prevalence odds halve (q1 = 1/3) and annotation flips 50%.
DEFAULT_BIAS: dict[str, dict[str, Any]] = {
    "presentation": {"presentation_shift": 1.0},
    "prevalence": {"base_rates": [0.5, 1.0 / 3.0]},
    "annotation": {"annotation_flip": 0.5},
    "causal_annotation": {"annotation_flip": 0.5},
}

# Desk-scale training overrides on top of the TrainConfig defaults: fewer
# samples per epoch need a larger step, and ten adversary updates per batch
# at a 10x step keep the adversary from being outpaced by the encoder.
DEFAULT_TRAIN: dict[str, Any] = {"lr": 1e-3, "adversary_steps": 10, "adversary_lr_scale": 10.0}


class GridError(ValueError):
    pass


@dataclass
class GridSpec:
    """Everything needed to reproduce a grid.

    ``scm_configs`` are the unbiased base models (one per dataset point).
    For the ``shift`` suite each mechanism's knobs in ``bias`` are applied on
    top of the base (``route="native"``), or the base sample is modified by
    an injection (``route="inject"``). Test data always comes from the
    unbiased base.
    """

    scm_configs: list[ScmConfig]
    suite: str = "iid"
    mechanisms: list[str] = field(default_factory=lambda: ["unbiased"])
    methods: list[str] = field(default_factory=lambda: ["erm", "frl", "cfrl"])
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    n_train: int = 8000
    n_val: int = 2000
    n_test: int = 10000
    route: str = "native"
    bias: dict[str, dict[str, Any]] = field(default_factory=dict)
    injection: dict[str, Any] = field(default_factory=lambda: {"rate": 0.5, "severity": 0.5})
    train: dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_TRAIN))
    separability_seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    mi_bins: int = 8

    def __post_init__(self):
        self.scm_configs = [c if isinstance(c, ScmConfig) else ScmConfig.from_dict(c) for c in self.scm_configs]
        self.validate()

    def validate(self) -> None:
        if not self.scm_configs:
            raise GridError("grid needs at least one SCM config")
        if self.suite not in ("iid", "shift"):
            raise GridError(f"unknown suite {self.suite!r}")
        if self.route not in ("native", "inject"):
            raise GridError(f"unknown route {self.route!r}")
        for c in self.scm_configs:
            if c.mechanism is not Mechanism.UNBIASED:
                raise GridError("base SCM configs must be unbiased; bias comes from `mechanisms`")
        for m in self.mechanisms:
            mech = Mechanism(m)
            if mech is Mechanism.COLLIDER:
                raise GridError("the collider variant has no unbiased test counterpart with the same features")
            if self.suite == "iid" and mech is not Mechanism.UNBIASED:
                raise GridError("the iid suite trains and tests on unbiased data only")
            if self.suite == "shift" and self.route == "inject" and m not in INJECTABLE:
                raise GridError(f"no injection for mechanism {m!r}")
        for m in self.methods:
            Method(m)
        if "erm" not in self.methods:
            raise GridError("ERM is the reference for every accuracy difference and must be in `methods`")
        TrainConfig.from_dict({k: v for k, v in self.train.items() if k not in ("method", "seed")})
        if min(self.n_train, self.n_val, self.n_test) < 50:
            raise GridError("each split needs at least 50 records")

    # -- (de)serialisation ------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "scm_configs": [c.to_dict() for c in self.scm_configs],
            "suite": self.suite,
            "mechanisms": list(self.mechanisms),
            "methods": list(self.methods),
            "seeds": list(self.seeds),
            "n_train": self.n_train,
            "n_val": self.n_val,
            "n_test": self.n_test,
            "route": self.route,
            "bias": self.bias,
            "injection": self.injection,
            "train": self.train,
            "separability_seeds": list(self.separability_seeds),
            "mi_bins": self.mi_bins,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GridSpec":
        """Accepts the fields above, or ``base_scm`` + ``separability_levels`` shorthand."""
        d = dict(d)
        if "separability_levels" in d:
            base = {"mechanism": "unbiased", **d.pop("base_scm", {})}
            d["scm_configs"] = [{**base, "separability_strength": s} for s in d.pop("separability_levels")]
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise GridError(f"unknown GridSpec keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "GridSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # -- coordinates ----------------------------------------------------------

    def dataset_ids(self) -> list[str]:
        return [f"d{i:02d}" for i in range(len(self.scm_configs))]

    def cells(self) -> list[tuple[int, str, int]]:
        return [(i, m, s) for i in range(len(self.scm_configs)) for m in self.mechanisms for s in self.seeds]

    def bias_knobs(self, mechanism: str) -> dict[str, Any]:
        return {**DEFAULT_BIAS.get(mechanism, {}), **self.bias.get(mechanism, {})}

    def train_config(self, method: str, seed: int) -> TrainConfig:
        return TrainConfig.from_dict({**self.train, "method": method, "seed": seed})


def default_grid(suite: str = "iid") -> GridSpec:
    base = ScmConfig(mechanism="unbiased", family="gaussian")
    configs = [base.replace(separability_strength=s) for s in (0.1, 0.4, 0.8)]
    if suite == "iid":
        return GridSpec(configs)
    return GridSpec(configs, suite="shift", mechanisms=list(INJECTABLE))


def cell_key(dataset_id: str, mechanism: str, seed: int) -> str:
    return f"{dataset_id}__{mechanism}__seed{seed}"


# -- cell execution -----------------------------------------------------------------


def cell_data(spec: GridSpec, index: int, mechanism: str, seed: int) -> tuple[Dataset, Dataset, Dataset, Scm]:
    """Train, validation and (always unbiased) test data for one cell, plus the train-time SCM."""
    base = Scm(spec.scm_configs[index])
    ds_id = spec.dataset_ids()[index]
    s_tr, s_va, s_te = (derive_seed(seed, ds_id, mechanism, part) for part in ("train", "val", "test"))
    test = base.sample(spec.n_test, s_te)
    if spec.suite == "iid" or mechanism == "unbiased":
        return base.sample(spec.n_train, s_tr), base.sample(spec.n_val, s_va), test, base
    if spec.route == "native":
        biased = Scm(spec.scm_configs[index].replace(mechanism=mechanism, **_knobs(spec.bias_knobs(mechanism))))
        counterpart = biased.unbiased_counterpart().config
        if counterpart.to_dict() != spec.scm_configs[index].replace(mechanism=counterpart.mechanism).to_dict():
            raise GridError("test SCM is not the unbiased counterpart of the training SCM")
        return biased.sample(spec.n_train, s_tr), biased.sample(spec.n_val, s_va), test, biased
    inj = {"kind": mechanism, **spec.injection}
    tr = apply_injection(base.sample(spec.n_train, s_tr), InjectionSpec(**inj, seed=derive_seed(s_tr, "inject")))
    va = apply_injection(base.sample(spec.n_val, s_va), InjectionSpec(**inj, seed=derive_seed(s_va, "inject")))
    return tr, va, test, base


def _knobs(k: dict[str, Any]) -> dict[str, Any]:
    return {key: tuple(v) if isinstance(v, list) else v for key, v in k.items()}


def _train_cmi(spec: GridSpec, train_scm: Scm, tr: Dataset) -> float:
    if spec.route == "native" and train_scm.family is Family.DISCRETE:
        return oracle_cmi(train_scm)
    from .verify import _binned_codes

    xz, xa = _binned_codes(tr, 4)
    return metrics.plugin_cmi(tr.y, xa, xz)


def run_cell(spec: GridSpec, index: int, mechanism: str, seed: int) -> dict[str, Any]:
    """Train all methods on one cell; returns a JSON-ready record (no timings inside rows)."""
    import time

    start = time.perf_counter()
    ds_id = spec.dataset_ids()[index]
    tr, va, te, train_scm = cell_data(spec, index, mechanism, seed)
    if te.provenance.get("config", {}).get("mechanism") != "unbiased":
        raise GridError("test data must be unbiased")
    cmi = _train_cmi(spec, train_scm, tr)
    reports = {}
    for method in spec.methods:
        model = train(tr, va, None, spec.train_config(method, seed))
        p = predict_dataset(model, te)
        rep = metrics.metrics_from_scores(p, te.y, te.a)
        r = extract_representations(model, te)
        rep.probe_auc = metrics.probe_leakage(r, te.a, seed)
        rep.mi_estimates = {
            "a_r": metrics.mi_continuous(r, te.a, bins=spec.mi_bins, seed=seed),
            "y_r": metrics.mi_continuous(r, te.y, bins=spec.mi_bins, seed=seed),
        }
        reports[method] = (rep, model.stopping_epoch)
    rows = []
    erm = reports["erm"][0]
    for method in spec.methods:
        rep, stop = reports[method]
        delta = metrics.delta_acc(rep, erm)
        for g in sorted(rep.per_group):
            rows.append({
                "dataset_id": ds_id,
                "mechanism": mechanism,
                "separability_s": spec.scm_configs[index].separability_strength,
                "method": method,
                "seed": seed,
                "group": g,
                "accuracy": rep.per_group[g]["accuracy"],
                "auc": rep.per_group[g]["auc"],
                "delta_acc_pp": delta[g],
                "probe_auc": rep.probe_auc,
                "mi_a_r": rep.mi_estimates["a_r"],
                "mi_y_r": rep.mi_estimates["y_r"],
                "cmi": cmi,
            })
    return {
        "key": cell_key(ds_id, mechanism, seed),
        "rows": rows,
        "stopping_epochs": {m: reports[m][1] for m in spec.methods},
        "wall_time_s": time.perf_counter() - start,
    }


def run_separability(spec: GridSpec, index: int) -> dict[str, Any]:
    base = Scm(spec.scm_configs[index])
    ds_id = spec.dataset_ids()[index]
    tr = base.sample(spec.n_train, derive_seed(0, ds_id, "separability", "train"))
    te = base.sample(spec.n_test, derive_seed(0, ds_id, "separability", "test"))
    cfg = spec.train_config("erm", 0)
    sep = metrics.separability_auc(tr, te, cfg, seeds=spec.separability_seeds)
    return {
        "key": f"{ds_id}__separability",
        "row": {
            "dataset_id": ds_id,
            "separability_s": spec.scm_configs[index].separability_strength,
            "oracle_auc": oracle_separability(base),
            "measured_auc": sep.mean,
            "measured_sd": sep.sd,
            "n_seeds": len(sep.values),
        },
    }


# -- persistence ----------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return str(v)


def _csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def resolve_out(out_dir) -> Path:
    if out_dir is None:
        root = os.environ.get(ENV_OUT)
        if not root:
            raise GridError(f"no output directory given and ${ENV_OUT} is unset")
        return Path(root)
    return Path(out_dir)


@dataclass
class GridResult:
    out_dir: Path
    rows: list[dict[str, Any]]
    separability: list[dict[str, Any]]
    failed: dict[str, str]
    n_trained_cells: int

    @property
    def ok(self) -> bool:
        return not self.failed


def _job(args):
    kind, spec_dict, payload = args
    spec = GridSpec.from_dict(spec_dict)
    try:
        if kind == "cell":
            return "ok", run_cell(spec, *payload)
        return "ok", run_separability(spec, payload)
    except Exception as exc:  # recorded per cell; the grid continues
        return "error", {"payload": payload, "kind": kind, "error": f"{type(exc).__name__}: {exc}",
                         "trace": traceback.format_exc()}


def run_grid(spec: GridSpec, out_dir=None, workers: int = 1, separability: bool = True) -> GridResult:
    out = resolve_out(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        old = json.loads(manifest_path.read_text())
        if old.get("digest") != spec.digest():
            raise GridError(f"{out} holds a different grid (digest {old.get('digest')}); use a fresh directory")
    cells_dir = out / "cells"
    jobs = []
    for idx, mech, seed in spec.cells():
        key = cell_key(spec.dataset_ids()[idx], mech, seed)
        if not (cells_dir / f"{key}.json").exists():
            jobs.append(("cell", spec.to_dict(), (idx, mech, seed)))
    if separability:
        for idx, ds_id in enumerate(spec.dataset_ids()):
            if not (cells_dir / f"{ds_id}__separability.json").exists():
                jobs.append(("sep", spec.to_dict(), idx))

    failed: dict[str, str] = {}
    n_trained = 0

    def collect(status, res):
        nonlocal n_trained
        if status == "ok":
            _atomic_write(cells_dir / f"{res['key']}.json", json.dumps(res, sort_keys=True) + "\n")
            n_trained += "rows" in res
        else:
            p = res["payload"]
            key = cell_key(spec.dataset_ids()[p[0]], p[1], p[2]) if res["kind"] == "cell" else f"d{p:02d}__separability"
            failed[key] = res["error"]

    if workers > 1 and len(jobs) > 1:
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            for status, res in pool.map(_job, jobs):
                collect(status, res)
    else:
        for job in jobs:
            collect(*_job(job))

    result = assemble(spec, out, failed)
    result.n_trained_cells = n_trained
    return result


def assemble(spec: GridSpec, out: Path, failed: dict[str, str] | None = None) -> GridResult:
    """Rebuild results.csv, separability.csv and the manifest from the cell files."""
    cells_dir = out / "cells"
    rows, done = [], []
    for idx, mech, seed in spec.cells():
        key = cell_key(spec.dataset_ids()[idx], mech, seed)
        path = cells_dir / f"{key}.json"
        if path.exists():
            rows += json.loads(path.read_text())["rows"]
            done.append(key)
    sep_rows = []
    for ds_id in spec.dataset_ids():
        path = cells_dir / f"{ds_id}__separability.json"
        if path.exists():
            sep_rows.append(json.loads(path.read_text())["row"])
    _atomic_write(out / "results.csv", _csv_text(CSV_COLUMNS, rows))
    if sep_rows:
        _atomic_write(out / "separability.csv", _csv_text(SEPARABILITY_COLUMNS, sep_rows))
    failed = failed or {}
    manifest = {
        "digest": spec.digest(),
        "spec": spec.to_dict(),
        "expected_cells": len(spec.cells()),
        "completed_cells": done,
        "failed_cells": failed,
        "expected_rows": len(spec.cells()) * len(spec.methods) * 2,
        "rows": len(rows),
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return GridResult(out, rows, sep_rows, failed, 0)


# -- reporting --------------------------------------------------------------------------


def read_csv(path) -> list[dict[str, Any]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k, v in r.items():
            if k in ("dataset_id", "mechanism", "method"):
                continue
            if k in ("seed", "group", "n_seeds"):
                r[k] = int(v)
            else:
                r[k] = float(v) if v != "" else None
    return rows


def _mean_sd(vals: list[float]) -> tuple[float, float, int]:
    arr = np.asarray(vals, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return float(arr.mean()), sd, len(arr)


def summarize(rows: list[dict[str, Any]], sep_rows: list[dict[str, Any]] | None = None) -> dict[str, Any]:
    """Aggregate tables behind the report, as plain data."""
    sep = {r["dataset_id"]: r for r in (sep_rows or [])}
    s_of = {r["dataset_id"]: r["separability_s"] for r in rows}

    def x_of(ds):
        return sep[ds]["measured_auc"] if ds in sep else s_of[ds]

    datasets = sorted(s_of, key=lambda ds: (x_of(ds), ds))
    methods = sorted({r["method"] for r in rows if r["method"] != "erm"})
    mechanisms = sorted({r["mechanism"] for r in rows})
    by_cell: dict[tuple, list[float]] = {}
    for r in rows:
        by_cell.setdefault((r["dataset_id"], r["mechanism"], r["method"], r["group"]), []).append(r["delta_acc_pp"])

    table = []
    for ds in datasets:
        for mech in mechanisms:
            for m in methods:
                for g in (0, 1):
                    vals = by_cell.get((ds, mech, m, g))
                    if vals:
                        mean, sd, n = _mean_sd(vals)
                        table.append({"dataset_id": ds, "mechanism": mech, "method": m, "group": g,
                                      "separability_x": x_of(ds), "mean_delta_pp": mean, "sd_delta_pp": sd, "n": n})

    association = {}
    for m in methods:
        xs, ys = [], []
        for ds in datasets:
            per_mech = [e["mean_delta_pp"] for e in table if e["dataset_id"] == ds and e["method"] == m and e["group"] == 1]
            if per_mech:
                xs.append(x_of(ds))
                ys.append(float(np.mean(per_mech)))
        entry: dict[str, Any] = {"x": xs, "y": ys}
        try:
            kt = metrics.kendall_tau(xs, ys)
            entry.update(tau=kt.tau, p_value=kt.p_value)
        except ValueError as exc:
            entry.update(tau=None, p_value=None, error=str(exc))
        association[m] = entry
    return {"datasets": datasets, "methods": methods, "mechanisms": mechanisms, "table": table,
            "association": association}


def report(results_dir, svg: bool = False) -> dict[str, Any]:
    """Write report/summary.md and report/report.json (plus SVGs when asked)."""
    root = Path(results_dir)
    rows = read_csv(root / "results.csv")
    if not rows:
        raise GridError(f"{root / 'results.csv'} has no rows")
    sep_rows = read_csv(root / "separability.csv") if (root / "separability.csv").exists() else []
    manifest = json.loads((root / "manifest.json").read_text()) if (root / "manifest.json").exists() else {}
    summary = summarize(rows, sep_rows)
    expected = manifest.get("expected_rows")
    summary["coverage"] = {"rows": len(rows), "expected_rows": expected,
                           "complete": expected is not None and expected == len(rows)}
    summary["suite"] = manifest.get("spec", {}).get("suite")
    summary["route"] = manifest.get("spec", {}).get("route")
    out = root / "report"
    _atomic_write(out / "report.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _atomic_write(out / "summary.md", _markdown(summary, sep_rows))
    if svg:
        for m, assoc in summary["association"].items():
            _atomic_write(out / f"association_{m}.svg", _scatter_svg(assoc, summary, m))
    return summary


def _markdown(summary: dict[str, Any], sep_rows: list[dict[str, Any]]) -> str:
    lines = ["# Grid summary", ""]
    cov = summary["coverage"]
    flag = "complete" if cov["complete"] else "INCOMPLETE"
    suite = summary["suite"]
    if suite == "shift":
        suite += f", {summary['route']} route" + (" (natively biased SCMs)" if summary["route"] == "native"
                                                  else " (bias injected into unbiased samples)")
    lines += [f"Suite: {suite}. Rows: {cov['rows']} of {cov['expected_rows']} ({flag}).", ""]
    if sep_rows:
        lines += ["## Subgroup separability", "", "| dataset | s | oracle AUC | measured AUC | sd |", "|---|---|---|---|---|"]
        for r in sorted(sep_rows, key=lambda r: r["measured_auc"]):
            lines.append(f"| {r['dataset_id']} | {r['separability_s']:g} | {r['oracle_auc']:.4f} | "
                         f"{r['measured_auc']:.4f} | {r['measured_sd']:.4f} |")
        lines.append("")
    lines += ["## Accuracy difference, FRL minus ERM (percentage points)", "",
              "Datasets sorted by increasing separability. Positive means FRL is more accurate.", "",
              "| dataset | separability | mechanism | method | group | mean | sd | n |",
              "|---|---|---|---|---|---|---|---|"]
    for e in summary["table"]:
        lines.append(f"| {e['dataset_id']} | {e['separability_x']:.4f} | {e['mechanism']} | {e['method']} | "
                     f"{e['group']} | {e['mean_delta_pp']:+.3f} | {e['sd_delta_pp']:.3f} | {e['n']} |")
    lines += ["", "## Conclusions", ""]
    table = summary["table"]
    if summary["suite"] == "iid" or summary["mechanisms"] == ["unbiased"]:
        worst = max((e["mean_delta_pp"] for e in table), default=float("nan"))
        verdict = "never" if worst <= 0.5 else "sometimes"
        lines.append(f"- Train and test unbiased: FRL {verdict} beats ERM by more than 0.5 pp "
                     f"(largest mean difference {worst:+.3f} pp).")
    else:
        for mech in summary["mechanisms"]:
            g1 = [e["mean_delta_pp"] for e in table if e["mechanism"] == mech and e["group"] == 1]
            if g1:
                lines.append(f"- {mech}: Group-1 mean difference ranges {min(g1):+.3f} to {max(g1):+.3f} pp.")
    for m, a in summary["association"].items():
        if a.get("tau") is None:
            lines.append(f"- {m}: association with separability undefined ({a.get('error')}).")
        else:
            lines.append(f"- {m}: Kendall tau between separability and Group-1 mean difference = "
                         f"{a['tau']:+.3f} (p = {a['p_value']:.4f}, {len(a['x'])} points).")
    return "\n".join(lines) + "\n"


def _scatter_svg(assoc: dict[str, Any], summary: dict[str, Any], method: str) -> str:
    w, h, pad = 480, 320, 48
    xs, ys = assoc["x"], assoc["y"]
    if not xs:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}"></svg>\n'
    sds = []
    for ds, x in zip(summary["datasets"], xs):
        e = [t["sd_delta_pp"] for t in summary["table"] if t["dataset_id"] == ds and t["method"] == method and t["group"] == 1]
        sds.append(float(np.mean(e)) if e else 0.0)
    x0, x1 = min(xs), max(xs)
    y0 = min(min(y - s for y, s in zip(ys, sds)), 0.0)
    y1 = max(max(y + s for y, s in zip(ys, sds)), 0.0)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    px = lambda x: pad + (x - x0) / (x1 - x0) * (w - 2 * pad)  # noqa: E731
    py = lambda y: h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad)  # noqa: E731
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-size="11">',
             f'<line x1="{pad}" y1="{py(0):.1f}" x2="{w - pad}" y2="{py(0):.1f}" stroke="#999"/>']
    for x, y, s in zip(xs, ys, sds):
        parts.append(f'<line x1="{px(x):.1f}" y1="{py(y - s):.1f}" x2="{px(x):.1f}" y2="{py(y + s):.1f}" stroke="#555"/>')
        parts.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="4" fill="#1f77b4"/>')
    parts.append(f'<text x="{w / 2}" y="{h - 10}" text-anchor="middle">separability AUC</text>')
    parts.append(f'<text x="12" y="{h / 2}" transform="rotate(-90 12 {h / 2})" text-anchor="middle">'
                 f'Group-1 accuracy difference ({method}, pp)</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
