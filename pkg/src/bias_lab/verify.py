"""Runnable checks for the effectiveness/harmlessness theory of fair representations.

Every :class:`CheckResult` stores the quantities and thresholds its verdict
was computed from, together with the name of the rule that maps them to a
status. :func:`rederive` recomputes the status from the stored numbers alone.

Statuses: ``pass``, ``fail``, ``not_applicable``, ``inconclusive``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import metrics
from .data import Dataset
from .nn import TrainedModel, extract_representations, predict
from .scm import Family, Mechanism, Scm, ScmConfig, exact_mi, oracle_cmi

CHANCE = 0.5
EPS_PROBE = 0.03
EPS_NATS = 0.02

PASS, FAIL, NA, INCONCLUSIVE = "pass", "fail", "not_applicable", "inconclusive"


@dataclass
class CheckResult:
    name: str
    rule: str
    quantities: dict[str, float]
    thresholds: dict[str, float]
    status: str
    notes: str = ""
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["pass"] = self.passed
        return d


# -- rules: status as a pure function of (quantities, thresholds) ---------------

RULES: dict[str, Callable[[dict, dict], str]] = {}


def _rule(name: str):
    def register(fn):
        RULES[name] = fn
        return fn

    return register


def rederive(result: CheckResult) -> str:
    return RULES[result.rule](result.quantities, result.thresholds)


@_rule("cmi_at_most")
def _cmi_rule(q, t):
    return PASS if q["cmi"] <= t["epsilon"] else FAIL


@_rule("effectiveness")
def _effectiveness_rule(q, t):
    cut = t["chance"] + t["eps_probe"]
    if any(abs(q[k] - cut) < t["band"] for k in ("probe_erm", "probe_frl")):
        return INCONCLUSIVE
    return PASS if q["probe_erm"] > cut and q["probe_frl"] <= cut else FAIL


@_rule("harmlessness")
def _harmlessness_rule(q, t):
    return PASS if q["mi_y_r"] >= q["mi_y_x"] - t["eps_nats"] else FAIL


@_rule("futility")
def _futility_rule(q, t):
    if not q["iid"]:
        return NA
    return FAIL if q["effective"] and q["harmless"] else PASS


@_rule("invariance")
def _invariance_rule(q, t):
    ok = q["probe_auc"] <= t["chance"] + t["eps_probe"] and q["displacement"] <= t["max_displacement"]
    return PASS if ok else FAIL


@_rule("erm_iff")
def _erm_iff_rule(q, t):
    if not q["trained"]:
        return NA
    leaks = q["probe_auc"] > t["chance"] + t["eps_probe"]
    return PASS if bool(leaks) == bool(q["biased"]) else FAIL


@_rule("oracle_futility")
def _oracle_futility_rule(q, t):
    return PASS if q["n_effective_and_harmless"] == 0 else FAIL


def _result(name, rule, quantities, thresholds, notes="", details=None) -> CheckResult:
    quantities = {k: float(v) for k, v in quantities.items()}
    thresholds = {k: float(v) for k, v in thresholds.items()}
    status = RULES[rule](quantities, thresholds)
    return CheckResult(name, rule, quantities, thresholds, status, notes, details or {})


# -- unbiasedness ---------------------------------------------------------------------


def _binned_codes(d: Dataset, bins: int) -> tuple[np.ndarray, np.ndarray]:
    if d.is_discrete:
        return d.feature_codes()

    def joint(arr):
        cols = np.column_stack([metrics.equal_frequency_bins(arr[:, j], bins) for j in range(arr.shape[1])])
        return np.unique(cols, axis=0, return_inverse=True)[1].ravel()

    return joint(d.x_z), joint(d.x_a)


def check_unbiased(
    source: Scm | Dataset, epsilon: float | None = None, n_perm: int = 200, seed: int = 0, bins: int = 4
) -> CheckResult:
    """Is ``Y`` independent of ``X_A`` given ``X_Z``?

    A discrete SCM is decided exactly (threshold 0). For data the plug-in CMI
    is compared to the 95th percentile of a conditional-permutation null
    unless ``epsilon`` is given. Continuous features are binned per column.
    """
    if isinstance(source, Scm):
        if source.family is not Family.DISCRETE:
            return CheckResult(
                "unbiased", "cmi_at_most", {"cmi": math.nan}, {"epsilon": 0.0}, NA,
                "no exact oracle for the Gaussian family; sample it and pass the dataset",
            )
        cmi = oracle_cmi(source)
        return _result("unbiased", "cmi_at_most", {"cmi": cmi}, {"epsilon": 0.0}, "exact enumeration")
    xz, xa = _binned_codes(source, bins)
    cmi = metrics.plugin_cmi(source.y, xa, xz)
    notes = "plug-in estimate"
    if epsilon is None:
        null = metrics.cmi_permutation_null(source.y, xa, xz, n_perm=n_perm, seed=seed)
        epsilon = float(np.quantile(null, 0.95))
        notes += f"; threshold = 95th percentile of {n_perm} conditional permutations"
    return _result("unbiased", "cmi_at_most", {"cmi": cmi}, {"epsilon": epsilon}, notes)


# -- effectiveness / harmlessness / futility -------------------------------------------------


def check_effectiveness(
    erm: TrainedModel, frl: TrainedModel, train: Dataset, eps_probe: float = EPS_PROBE,
    seed: int = 0, band: float = 0.0, train_bias: CheckResult | None = None,
) -> CheckResult:
    """FRL representations hide ``A`` while ERM representations reveal it.

    Probe AUCs stand in for I(A; R). The result also records whether the
    training data looks biased, since effectiveness implies train-time bias.
    """
    probe_erm = metrics.probe_leakage(extract_representations(erm, train), train.a, seed)
    probe_frl = metrics.probe_leakage(extract_representations(frl, train), train.a, seed)
    train_bias = train_bias or check_unbiased(train, seed=seed)
    res = _result(
        "effectiveness", "effectiveness",
        {"probe_erm": probe_erm, "probe_frl": probe_frl},
        {"chance": CHANCE, "eps_probe": eps_probe, "band": band},
    )
    biased = train_bias.status == FAIL
    res.quantities["train_cmi"] = train_bias.quantities["cmi"]
    res.thresholds["train_cmi_epsilon"] = train_bias.thresholds["epsilon"]
    res.details["train_biased"] = biased
    if res.passed and not biased:
        res.notes = "effective on training data that tests as unbiased; expected only from estimator noise"
    elif res.passed:
        res.notes = "effective, and the training data is biased as the theory requires"
    return res


def _reference_information(d: Dataset, bins: int, seed: int) -> float:
    if d.is_discrete:
        xz, xa = d.feature_codes()
        x = np.unique(np.column_stack([xz, xa]), axis=0, return_inverse=True)[1].ravel()
        return metrics.mi_discrete(metrics.contingency(x, d.y))
    return metrics.mi_continuous(d.design_matrix(), d.y, bins=bins, seed=seed)


def check_harmlessness(
    frl: TrainedModel, test: Dataset, eps_nats: float = EPS_NATS, bins: int = 8, seed: int = 0,
    test_bias: CheckResult | None = None,
) -> CheckResult:
    """FRL representations keep the task information present in the inputs."""
    r = extract_representations(frl, test)
    mi_y_r = metrics.mi_continuous(r, test.y, bins=bins, seed=seed)
    mi_y_x = _reference_information(test, bins, seed)
    res = _result(
        "harmlessness", "harmlessness",
        {"mi_y_r": mi_y_r, "mi_y_x": mi_y_x, "deficit": mi_y_x - mi_y_r},
        {"eps_nats": eps_nats},
    )
    test_bias = test_bias or check_unbiased(test, seed=seed)
    res.quantities["test_cmi"] = test_bias.quantities["cmi"]
    res.details["test_unbiased"] = test_bias.passed
    if res.passed and not test_bias.passed:
        res.notes = "harmless on test data that tests as biased; expected only from estimator noise"
    return res


def check_futility(
    erm: TrainedModel, frl: TrainedModel, train: Dataset, test: Dataset, iid: bool,
    eps_probe: float = EPS_PROBE, eps_nats: float = EPS_NATS, seed: int = 0,
) -> CheckResult:
    """Under identically distributed train and test, effective and harmless never both hold."""
    if not iid:
        return CheckResult(
            "futility", "futility", {"iid": 0.0, "effective": 0.0, "harmless": 0.0}, {}, NA,
            "train and test are not identically distributed; the impossibility claim does not apply",
        )
    e = check_effectiveness(erm, frl, train, eps_probe, seed)
    h = check_harmlessness(frl, test, eps_nats, seed=seed)
    res = _result(
        "futility", "futility",
        {"iid": 1, "effective": e.passed, "harmless": h.passed, **{f"e.{k}": v for k, v in e.quantities.items()},
         **{f"h.{k}": v for k, v in h.quantities.items()}},
        {"eps_probe": eps_probe, "eps_nats": eps_nats},
        details={"effectiveness": e.to_dict(), "harmlessness": h.to_dict()},
    )
    if res.status == FAIL:
        cut = CHANCE + eps_probe
        res.notes = (
            "theory violation: effective and harmless jointly. Margins: "
            f"ERM probe {e.quantities['probe_erm'] - cut:+.4f}, FRL probe {cut - e.quantities['probe_frl']:+.4f}, "
            f"information {h.quantities['mi_y_r'] - h.quantities['mi_y_x'] + eps_nats:+.4f} nats; "
            "small margins point at estimator noise"
        )
    return res


# -- representation-level lemmas ----------------------------------------------------------------


def check_fair_rep_invariance(
    frl: TrainedModel, scm: Scm, n: int = 2000, seed: int = 0,
    eps_probe: float = EPS_PROBE, max_displacement: float = 0.1,
) -> CheckResult:
    """How much does R move when ``A`` is flipped and ``x_a`` redrawn, ``x_z`` fixed?"""
    d = scm.sample(n, seed)
    cf = d.replace(x_a=scm.resample_x_a(1 - d.a, d.z, seed + 1))
    r = extract_representations(frl, d)
    r_cf = extract_representations(frl, cf)
    scale = float(np.linalg.norm(r, axis=1).mean())
    moved = float(np.linalg.norm(r - r_cf, axis=1).mean())
    displacement = moved / scale if scale > 0 else (0.0 if moved == 0 else math.inf)
    probe = metrics.probe_leakage(r, d.a, seed)
    return _result(
        "fair_rep_invariance", "invariance",
        {"displacement": displacement, "probe_auc": probe},
        {"chance": CHANCE, "eps_probe": eps_probe, "max_displacement": max_displacement},
        "displacement is mean |R(x) - R(x_cf)| / mean |R(x)|",
    )


def _is_biased(scm: Scm, threshold: float) -> tuple[bool, float]:
    if scm.family is Family.DISCRETE:
        cmi = oracle_cmi(scm)
        return cmi > threshold, cmi
    c = scm.config
    structural = (
        scm.mechanism is Mechanism.COLLIDER
        or c.base_rates[0] != c.base_rates[1]
        or c.presentation_shift > 0
        or c.annotation_flip > 0
    )
    return structural, math.nan


def check_erm_fairness_iff(
    erm: TrainedModel, scm: Scm, eps_probe: float = EPS_PROBE, n: int = 4000, seed: int = 0,
    cmi_threshold: float = 1e-3, min_val_auc: float = 0.6,
) -> CheckResult:
    """ERM representations leak ``A`` exactly when the training distribution is biased.

    Requires a properly trained model; untrained or unconverged models are
    reported as not applicable.
    """
    best = None
    if erm.is_trained and erm.stopping_epoch is not None:
        best = erm.history[erm.stopping_epoch]["val_monitor"]
    trained = best is not None and best >= min_val_auc
    biased, cmi = _is_biased(scm, cmi_threshold)
    probe = math.nan
    if trained:
        d = scm.sample(n, seed)
        probe = metrics.probe_leakage(extract_representations(erm, d), d.a, seed)
    res = _result(
        "erm_fairness_iff", "erm_iff",
        {"trained": trained, "biased": biased, "cmi": cmi, "probe_auc": probe},
        {"chance": CHANCE, "eps_probe": eps_probe, "cmi_threshold": cmi_threshold},
    )
    if res.status == FAIL:
        res.notes = (
            "mismatch between leakage and bias. The equivalence assumes the learned features form "
            "a Markov blanket of Y, which finite training need not achieve"
        )
    elif res.status == NA:
        res.notes = "model is untrained or did not converge"
    return res


# -- exact oracle instantiation ---------------------------------------------------------------


def _group_codes(values: list) -> np.ndarray:
    index: dict = {}
    return np.array([index.setdefault(v, len(index)) for v in values], dtype=np.int64)


def _independent_of_a(p_ax: np.ndarray, codes: np.ndarray) -> bool:
    k = int(codes.max()) + 1
    table = np.full((2, k), Fraction(0), dtype=object)
    for i, c in enumerate(codes):
        table[0, c] += p_ax[0, i]
        table[1, c] += p_ax[1, i]
    return exact_mi(table) == 0.0


def _sufficient(p_xy: np.ndarray, codes: np.ndarray) -> bool:
    """Exact test of Y independent of X given R = codes(X)."""
    k = int(codes.max()) + 1
    r_y = np.full((k, 2), Fraction(0), dtype=object)
    for i, c in enumerate(codes):
        r_y[c] += p_xy[i]
    for i, c in enumerate(codes):
        px = p_xy[i, 0] + p_xy[i, 1]
        if px and p_xy[i, 1] * (r_y[c, 0] + r_y[c, 1]) != r_y[c, 1] * px:
            return False
    return True


def oracle_futility(scm: Scm, n_random: int = 6, seed: int = 0) -> CheckResult:
    """Exact-arithmetic instantiation of the impossibility claim on one discrete SCM.

    ``R_ERM`` is the exact posterior ``P(Y=1 | X)``. Candidate FRL
    representations: the identity, ``X_Z``, ``X_A``, the posterior, the
    ``X_Z``-only posterior, a constant and ``n_random`` random partitions of
    the input support. With train = test, a candidate is effective when
    I(A; R_ERM) > 0 = I(A; R_FRL) and harmless when Y is independent of X
    given R_FRL; both are decided exactly.
    """
    if scm.family is not Family.DISCRETE:
        raise ValueError("oracle_futility needs the discrete family")
    j = scm.observed_joint  # [a, xz, xa, y]
    n_xz, n_xa = j.shape[1], j.shape[2]
    p_ax = j.sum(axis=3).reshape(2, n_xz * n_xa)
    p_xy = j.sum(axis=0).reshape(n_xz * n_xa, 2)
    xz_of = np.repeat(np.arange(n_xz), n_xa)
    xa_of = np.tile(np.arange(n_xa), n_xz)

    def posterior(i, p):
        tot = p[i, 0] + p[i, 1]
        return p[i, 1] / tot if tot else None

    post = [posterior(i, p_xy) for i in range(len(p_xy))]
    p_zy = j.sum(axis=(0, 2))
    post_z = [posterior(xz_of[i], p_zy) for i in range(len(p_xy))]
    rng = np.random.default_rng(seed)
    candidates = {
        "identity": np.arange(len(p_xy)),
        "x_z": xz_of,
        "x_a": xa_of,
        "posterior": _group_codes(post),
        "posterior_x_z": _group_codes(post_z),
        "constant": np.zeros(len(p_xy), dtype=np.int64),
    }
    for k in range(n_random):
        candidates[f"random_{k}"] = _group_codes(rng.integers(0, 2 + k % 3, len(p_xy)).tolist())

    erm_leaks = not _independent_of_a(p_ax, candidates["posterior"])
    cmi = oracle_cmi(scm)
    rows = {}
    n_eff = n_harm = n_joint = lemma_e = lemma_h = 0
    for name, codes in candidates.items():
        fair = _independent_of_a(p_ax, codes)
        effective = erm_leaks and fair
        harmless = _sufficient(p_xy, codes)
        rows[name] = {"fair": fair, "effective": effective, "harmless": harmless}
        n_eff += effective
        n_harm += harmless
        n_joint += effective and harmless
        lemma_e += effective and cmi == 0.0
        lemma_h += fair and harmless and cmi > 0.0
    return _result(
        "oracle_futility", "oracle_futility",
        {
            "n_candidates": len(candidates), "n_effective": n_eff, "n_harmless": n_harm,
            "n_effective_and_harmless": n_joint, "erm_leaks": erm_leaks, "cmi": cmi,
            "effective_but_unbiased": lemma_e, "fair_sufficient_but_biased": lemma_h,
        },
        {},
        "exact rational arithmetic",
        {"candidates": rows, "config": scm.config.to_dict()},
    )


def random_discrete_config(rng: np.random.Generator, mechanism: Mechanism | str) -> ScmConfig:
    """A valid discrete config with knobs on a 0.05 grid (task signal kept below 1)."""
    mech = Mechanism(mechanism)
    grid = lambda lo, hi: round(float(rng.integers(int(lo * 20), int(hi * 20) + 1)) / 20, 2)  # noqa: E731
    q0 = grid(0.2, 0.8)
    kw: dict[str, Any] = dict(
        mechanism=mech, family=Family.DISCRETE,
        d_z=int(rng.integers(2, 7)), d_a=int(rng.integers(2, 7)),
        p_a=grid(0.3, 0.7), base_rates=(q0, q0),
        separability_strength=grid(0.1, 0.9), task_signal=grid(0.2, 0.9),
        label_noise=grid(0.0, 0.15),
    )
    if mech is Mechanism.PREVALENCE:
        q1 = q0
        while q1 == q0:
            q1 = grid(0.2, 0.8)
        kw["base_rates"] = (q0, q1)
    elif mech is Mechanism.PRESENTATION:
        kw["presentation_shift"] = grid(0.1, 0.9)
    elif mech in (Mechanism.ANNOTATION, Mechanism.CAUSAL_ANNOTATION):
        kw["annotation_flip"] = grid(0.1, 0.6)
    return ScmConfig(**kw)


def random_discrete_configs(count: int, seed: int = 0) -> list[ScmConfig]:
    rng = np.random.default_rng(seed)
    mechs = list(Mechanism)
    return [random_discrete_config(rng, mechs[i % len(mechs)]) for i in range(count)]


# -- reports ------------------------------------------------------------------------------------


@dataclass
class VerificationReport:
    checks: list[CheckResult]
    settings: dict[str, Any] = field(default_factory=dict)

    def summary(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.checks:
            out[c.status] = out.get(c.status, 0) + 1
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"settings": self.settings, "summary": self.summary(), "checks": [c.to_dict() for c in self.checks]}

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n")
        return path


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, Fraction):
        return str(o)
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not serialisable: {type(o)}")


VERIFY_DEFAULTS: dict[str, Any] = {
    "n_oracle_configs": 24,
    "oracle_seed": 0,
    "seeds": [0, 1],
    "n_train": 4000,
    "n_val": 1000,
    "n_test": 4000,
    "scm": {"family": "gaussian", "separability_strength": 0.8},
    "biased_scm": {"mechanism": "prevalence", "base_rates": [0.5, 1.0 / 3.0]},
    "train": {"lr": 1e-3, "adversary_steps": 10, "adversary_lr_scale": 10.0},
}


def run_suite(suite: str = "all", config: dict[str, Any] | None = None) -> VerificationReport:
    """Run the ``iid``, ``lemmas`` or ``all`` suite with settings merged over defaults."""
    from .nn import TrainConfig, train

    if suite not in ("iid", "lemmas", "all"):
        raise ValueError(f"unknown suite {suite!r}")
    cfg = {**VERIFY_DEFAULTS, **(config or {})}
    checks: list[CheckResult] = []
    base = ScmConfig.from_dict({"mechanism": "unbiased", **cfg["scm"]})
    biased = ScmConfig.from_dict({**base.to_dict(), **cfg["biased_scm"]})
    tcfg = TrainConfig.from_dict(cfg["train"])

    def fit(sc: ScmConfig, method: str, seed: int):
        s = Scm(sc)
        tr = s.sample(cfg["n_train"], 3 * seed)
        va = s.sample(cfg["n_val"], 3 * seed + 1)
        te = s.sample(cfg["n_test"], 3 * seed + 2)
        return train(tr, va, None, tcfg.replace(method=method, seed=seed)), tr, te

    if suite in ("iid", "all"):
        for sc in random_discrete_configs(cfg["n_oracle_configs"], cfg["oracle_seed"]):
            checks.append(oracle_futility(Scm(sc)))
        for sc in (base, biased):
            for seed in cfg["seeds"]:
                erm, tr, te = fit(sc, "erm", seed)
                frl, _, _ = fit(sc, "frl", seed)
                res = check_futility(erm, frl, tr, te, iid=True, seed=seed)
                res.details["scm"] = sc.to_dict()
                res.details["seed"] = seed
                checks.append(res)
    if suite in ("lemmas", "all"):
        for sc in (base, biased):
            s = Scm(sc)
            for seed in cfg["seeds"]:
                erm, _, _ = fit(sc, "erm", seed)
                frl, _, _ = fit(sc, "frl", seed)
                inv = check_fair_rep_invariance(frl, s, seed=seed)
                iff = check_erm_fairness_iff(erm, s, seed=seed)
                for r in (inv, iff):
                    r.details["scm"] = sc.to_dict()
                    r.details["seed"] = seed
                checks += [inv, iff]
    return VerificationReport(checks, {"suite": suite, **cfg})
