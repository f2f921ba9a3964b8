"""Command line entry point ``bias-lab``.

Configs are JSON documents. Field names match the dataclasses they feed
(ScmConfig, TrainConfig, GridSpec), so every field is addressable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import Dataset
from .inject import InjectionSpec, apply_injection
from .nn import Architecture, TrainConfig, TrainingError, train
from .runner import GridError, GridSpec, report, run_grid
from .scm import Scm, ScmConfig
from .verify import run_suite


def _read_json(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def cmd_sample(args) -> int:
    cfg = _read_json(args.config)
    if args.mechanism:
        cfg["mechanism"] = args.mechanism
    scm = Scm(ScmConfig.from_dict(cfg))
    d = scm.sample(args.n, args.seed)
    d.save(args.out)
    print(f"wrote {len(d)} records to {args.out}")
    return 0


def cmd_inject(args) -> int:
    d = Dataset.load(args.inp)
    spec = InjectionSpec(args.kind, target_group=args.group, rate=args.rate, severity=args.severity, seed=args.seed)
    out = apply_injection(d, spec)
    out.save(args.out)
    print(f"{args.kind}: {len(d)} -> {len(out)} records, written to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _read_json(args.config)
    arch_d = cfg.pop("architecture", None)
    cfg["method"] = args.method
    if args.seed is not None:
        cfg["seed"] = args.seed
    tcfg = TrainConfig.from_dict(cfg)
    tr = Dataset.load(args.train)
    va = Dataset.load(args.val)
    arch = None
    if arch_d is not None:
        arch_d["layer_widths"] = tuple(arch_d["layer_widths"])
        arch = Architecture(**arch_d)
    model = train(tr, va, arch, tcfg)
    model.save(args.out)
    best = model.history[model.stopping_epoch]["val_monitor"] if model.history else float("nan")
    print(f"{args.method}: stopped at epoch {model.stopping_epoch}, val monitor {best:.4f}, saved {args.out}")
    return 0


def cmd_verify(args) -> int:
    rep = run_suite(args.suite, _read_json(args.config))
    rep.save(args.out)
    summary = rep.summary()
    print(" ".join(f"{k}={v}" for k, v in sorted(summary.items())))
    return 1 if summary.get("fail", 0) else 0


def cmd_grid(args) -> int:
    spec = GridSpec.load(args.spec)
    res = run_grid(spec, args.out, workers=args.workers, separability=not args.no_separability)
    print(f"{len(res.rows)} rows, {res.n_trained_cells} cells trained, {len(res.failed)} failed -> {res.out_dir}")
    for key, err in sorted(res.failed.items()):
        print(f"  FAILED {key}: {err}", file=sys.stderr)
    return 0 if res.ok else 1


def cmd_report(args) -> int:
    summary = report(args.dir, svg=args.svg)
    for m, a in summary["association"].items():
        tau = "n/a" if a.get("tau") is None else f"{a['tau']:+.3f} (p={a['p_value']:.3g})"
        print(f"{m}: kendall tau {tau}")
    print(f"report written to {Path(args.dir) / 'report'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bias-lab", description="Synthetic bias mechanisms, fair representations, grids.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a dataset from an SCM config")
    p.add_argument("--config", help="JSON ScmConfig (defaults when omitted)")
    p.add_argument("--mechanism", help="override the config mechanism")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("inject", help="inject bias into a saved dataset")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--kind", required=True, choices=["prevalence", "presentation", "annotation"])
    p.add_argument("--group", type=int, default=1)
    p.add_argument("--rate", type=float, default=0.5)
    p.add_argument("--severity", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_inject)

    p = sub.add_parser("train", help="train one model and write a checkpoint")
    p.add_argument("--method", required=True, choices=["erm", "frl", "cfrl"])
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--config", help="JSON TrainConfig, optional 'architecture' entry")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("verify", help="run verification checks")
    p.add_argument("--suite", default="all", choices=["iid", "lemmas", "all"])
    p.add_argument("--config", help="JSON overrides of the suite settings")
    p.add_argument("--out", default="report.json")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("grid", help="run (or resume) an experiment grid")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", help="output directory (default: $BIAS_LAB_OUT)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-separability", action="store_true", help="skip attribute-classifier AUC runs")
    p.set_defaults(fn=cmd_grid)

    p = sub.add_parser("report", help="summarise a grid directory")
    p.add_argument("dir")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (GridError, TrainingError, ValueError, FileNotFoundError) as exc:
        print(f"bias-lab {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
