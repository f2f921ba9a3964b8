"""Performance, fairness, information and rank-statistics measures.

All information quantities are in nats.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.stats import norm, rankdata

from .data import Dataset

# Plug-in estimates may dip below zero only through float error.
ESTIMATOR_BIAS_FLOOR = 1e-12


# -- AUC and group metrics ---------------------------------------------------


def auc_score(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Mann-Whitney AUC with ties counted half; None when a class is absent."""
    labels = np.asarray(labels)
    n1 = int((labels == 1).sum())
    n0 = len(labels) - n1
    if n1 == 0 or n0 == 0:
        return None
    ranks = rankdata(np.asarray(scores, dtype=np.float64))
    return float((ranks[labels == 1].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


@dataclass
class MetricsReport:
    per_group: dict[int, dict[str, float | None]]
    overall: dict[str, float | None]
    dp_gap: float
    eo_gap: float
    threshold: float = 0.5
    probe_auc: float | None = None
    mi_estimates: dict[str, float] = field(default_factory=dict)

    def mi_reported(self) -> dict[str, float]:
        """MI estimates clamped at zero (raw values stay in ``mi_estimates``)."""
        return {k: max(0.0, v) for k, v in self.mi_estimates.items()}

    def to_text(self) -> str:
        """Flat ``key=value`` lines; absent values are written as ``none``."""
        items: list[tuple[str, object]] = [("threshold", self.threshold)]
        for g in sorted(self.per_group):
            for k in ("n", "accuracy", "auc"):
                items.append((f"group.{g}.{k}", self.per_group[g].get(k)))
        items += [(f"overall.{k}", v) for k, v in sorted(self.overall.items())]
        items += [("dp_gap", self.dp_gap), ("eo_gap", self.eo_gap), ("probe_auc", self.probe_auc)]
        items += [(f"mi.{k}", v) for k, v in sorted(self.mi_estimates.items())]
        return "".join(f"{k}={_fmt(v)}\n" for k, v in items)

    @classmethod
    def from_text(cls, text: str) -> "MetricsReport":
        kv = dict(line.split("=", 1) for line in text.splitlines() if line)
        val = {k: _parse(v) for k, v in kv.items()}
        per_group: dict[int, dict] = {}
        for k, v in val.items():
            if k.startswith("group."):
                _, g, name = k.split(".")
                per_group.setdefault(int(g), {})[name] = int(v) if name == "n" else v
        return cls(
            per_group=per_group,
            overall={k[8:]: v for k, v in val.items() if k.startswith("overall.")},
            dp_gap=val["dp_gap"],
            eo_gap=val["eo_gap"],
            threshold=val["threshold"],
            probe_auc=val["probe_auc"],
            mi_estimates={k[3:]: v for k, v in val.items() if k.startswith("mi.")},
        )


def _fmt(v) -> str:
    return "none" if v is None else repr(float(v))


def _parse(s: str):
    return None if s == "none" else float(s)


def _rate(mask: np.ndarray, pred: np.ndarray) -> float | None:
    return float(pred[mask].mean()) if mask.any() else None


def metrics_from_scores(p: np.ndarray, y: np.ndarray, a: np.ndarray, threshold: float = 0.5) -> MetricsReport:
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    a = np.asarray(a)
    groups = sorted(set(a.tolist()))
    if len(groups) < 2:
        raise ValueError("need records from both groups")
    pred = (p >= threshold).astype(np.int64)
    correct = pred == y
    per_group = {}
    for g in groups:
        m = a == g
        per_group[g] = {"n": int(m.sum()), "accuracy": float(correct[m].mean()), "auc": auc_score(p[m], y[m])}
    pos_rate = [_rate(a == g, pred) for g in groups]
    tpr = [_rate((a == g) & (y == 1), pred) for g in groups]
    tnr = [_rate((a == g) & (y == 0), 1 - pred) for g in groups]
    eo = [abs(r[0] - r[1]) for r in (tpr, tnr) if None not in r]
    return MetricsReport(
        per_group=per_group,
        overall={"accuracy": float(correct.mean()), "auc": auc_score(p, y)},
        dp_gap=abs(pos_rate[0] - pos_rate[1]),
        eo_gap=max(eo) if eo else 0.0,
        threshold=threshold,
    )


def group_metrics(m, d: Dataset, threshold: float = 0.5) -> MetricsReport:
    from .nn import predict_dataset

    if len(d) == 0:
        raise ValueError("empty dataset")
    return metrics_from_scores(predict_dataset(m, d), d.y, d.a, threshold)


def delta_acc(frl: MetricsReport, erm: MetricsReport) -> dict[int, float]:
    """Per-group ``100 * (acc_frl - acc_erm)``; positive means FRL is better."""
    if set(frl.per_group) != set(erm.per_group):
        raise ValueError(f"group mismatch: {sorted(frl.per_group)} vs {sorted(erm.per_group)}")
    return {g: 100.0 * (frl.per_group[g]["accuracy"] - erm.per_group[g]["accuracy"]) for g in sorted(frl.per_group)}


# -- subgroup separability ---------------------------------------------------------


class Separability(NamedTuple):
    mean: float
    sd: float
    values: tuple[float, ...]


def separability_auc(train: Dataset, test: Dataset, cfg=None, seeds=(0,), arch=None) -> Separability:
    """Test AUC of networks trained to predict ``a`` from the inputs.

    A quarter of ``train`` (stratified on ``a``) is held out for early
    stopping. ``sd`` is the across-seed sample standard deviation (0 for a
    single seed).
    """
    from .inject import split_dataset
    from .nn import TrainConfig, predict_dataset, train as fit

    for name, d in (("train", train), ("test", test)):
        if len(set(d.a.tolist())) < 2:
            raise ValueError(f"{name} split needs both groups")
    cfg = cfg or TrainConfig()
    values = []
    for seed in seeds:
        tr, va = split_dataset(train, (0.75, 0.25), seed=seed, stratify_on=("a",))
        c = cfg.replace(method="erm", seed=seed, monitor="auc")
        model = fit(tr, va, arch, c, target="a")
        values.append(auc_score(predict_dataset(model, test), test.a))
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return Separability(float(np.mean(values)), sd, tuple(values))


# -- discrete information measures --------------------------------------------------


def _check_table(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("counts must be non-negative")
    if t.sum() <= 0:
        raise ValueError("table is all zero")
    return t


def _entropy(t: np.ndarray, total: float, miller_madow: bool) -> float:
    p = t[t > 0] / total
    h = float(-(p * np.log(p)).sum())
    if miller_madow:
        h += (len(p) - 1) / (2.0 * total)
    return h


def _entropy_of(t: np.ndarray, keep: tuple[int, ...], miller_madow: bool) -> float:
    drop = tuple(i for i in range(t.ndim) if i not in keep)
    marg = t.sum(axis=drop) if drop else t
    return _entropy(marg, t.sum(), miller_madow)


def mi_discrete(counts, miller_madow: bool = False) -> float:
    """I(X;Y) from a 2-D contingency table (counts or probabilities)."""
    t = _check_table(counts)
    if t.ndim != 2:
        raise ValueError("need a 2-D table")
    if not miller_madow:
        p = t / t.sum()
        px = p.sum(axis=1, keepdims=True)
        py = p.sum(axis=0, keepdims=True)
        nz = p > 0
        return float((p[nz] * np.log(p[nz] / (px @ py)[nz])).sum())
    return _entropy_of(t, (0,), True) + _entropy_of(t, (1,), True) - _entropy_of(t, (0, 1), True)


def cmi_discrete(counts, miller_madow: bool = False) -> float:
    """I(Y; X_A | X_Z) from a table indexed ``[y, x_a, x_z]``."""
    t = _check_table(counts)
    if t.ndim != 3:
        raise ValueError("need a 3-D table indexed [y, x_a, x_z]")
    mm = miller_madow
    return (
        _entropy_of(t, (0, 2), mm)
        + _entropy_of(t, (1, 2), mm)
        - _entropy_of(t, (2,), mm)
        - _entropy_of(t, (0, 1, 2), mm)
    )


def contingency(*codes: np.ndarray, sizes: tuple[int, ...] | None = None) -> np.ndarray:
    """Count table over non-negative integer code vectors."""
    codes = [np.asarray(c, dtype=np.int64) for c in codes]
    if sizes is None:
        sizes = tuple(int(c.max()) + 1 if len(c) else 1 for c in codes)
    flat = np.ravel_multi_index(codes, sizes)
    return np.bincount(flat, minlength=int(np.prod(sizes))).reshape(sizes).astype(np.float64)


def plugin_cmi(y, x_a, x_z, miller_madow: bool = False) -> float:
    _, xa = np.unique(x_a, return_inverse=True)
    _, xz = np.unique(x_z, return_inverse=True)
    return cmi_discrete(contingency(y, xa.ravel(), xz.ravel()), miller_madow)


def cmi_permutation_null(y, x_a, x_z, n_perm: int = 200, seed: int = 0) -> np.ndarray:
    """Plug-in CMI after shuffling ``x_a`` within each ``x_z`` stratum.

    The shuffle preserves the (x_a, x_z) and (y, x_z) margins and enforces
    Y independent of X_A given X_Z.
    """
    y = np.asarray(y)
    _, xa = np.unique(x_a, return_inverse=True)
    _, xz = np.unique(x_z, return_inverse=True)
    xa, xz = xa.ravel(), xz.ravel()
    order = np.argsort(xz, kind="stable")
    bounds = np.flatnonzero(np.diff(xz[order])) + 1
    strata = np.split(order, bounds)
    rng = np.random.default_rng(seed)
    sizes = (int(y.max()) + 1, int(xa.max()) + 1, int(xz.max()) + 1)
    out = np.empty(n_perm)
    for k in range(n_perm):
        shuffled = xa.copy()
        for s in strata:
            shuffled[s] = xa[rng.permutation(s)]
        out[k] = cmi_discrete(contingency(y, shuffled, xz, sizes=sizes))
    return out


# -- continuous representations ------------------------------------------------------


def _probe_projection(r: np.ndarray, labels: np.ndarray, seed: int) -> np.ndarray:
    from sklearn.linear_model import LogisticRegression
    from sklearn.preprocessing import StandardScaler

    if r.shape[1] == 1:
        return r[:, 0]
    keep = r.std(axis=0) > 0
    if not keep.any():
        return np.zeros(len(r))
    z = StandardScaler().fit_transform(r[:, keep])
    clf = LogisticRegression(max_iter=2000, random_state=seed % 2**32)
    clf.fit(z, labels)
    return clf.decision_function(z)


def equal_frequency_bins(v: np.ndarray, bins: int) -> np.ndarray:
    """Bin codes from unique empirical quantile edges (constant input -> one bin)."""
    edges = np.unique(np.quantile(v, np.linspace(0, 1, bins + 1)[1:-1]))
    return np.searchsorted(edges, v, side="right")


def mi_continuous(r, labels, bins: int = 8, seed: int = 0) -> float:
    """Plug-in I(label; R) after projecting R onto a probe logit and binning.

    An estimate, biased upward at small n (the projection is fit in-sample).
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim == 1:
        r = r[:, None]
    labels = np.asarray(labels).astype(np.int64)
    if len(r) < 10 * bins:
        raise ValueError(f"need n >= 10*bins ({10 * bins}), got {len(r)}")
    if len(np.unique(labels)) < 2:
        return 0.0
    codes = equal_frequency_bins(_probe_projection(r, labels, seed), bins)
    return mi_discrete(contingency(codes, labels))


def probe_leakage(r, attr, seed: int = 0) -> float:
    """Held-out AUC of a logistic probe predicting ``attr`` from ``r``."""
    from sklearn.linear_model import LogisticRegression
    from sklearn.model_selection import train_test_split
    from sklearn.preprocessing import StandardScaler

    r = np.asarray(r, dtype=np.float64)
    if r.ndim == 1:
        r = r[:, None]
    attr = np.asarray(attr).astype(np.int64)
    if len(r) < 50:
        raise ValueError("probe needs at least 50 records")
    if len(np.unique(attr)) < 2:
        raise ValueError("probe needs both groups")
    r_tr, r_te, a_tr, a_te = train_test_split(r, attr, test_size=0.5, stratify=attr, random_state=seed % 2**32)
    scaler = StandardScaler().fit(r_tr)
    clf = LogisticRegression(max_iter=2000).fit(scaler.transform(r_tr), a_tr)
    return auc_score(clf.decision_function(scaler.transform(r_te)), a_te)


# -- Kendall's tau ---------------------------------------------------------------------


class KendallResult(NamedTuple):
    tau: float
    p_value: float


def _pair_signs(v: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(len(v), k=1)
    return np.sign(v[i] - v[j]).astype(np.int64)


def _tie_pairs(v: np.ndarray) -> int:
    _, t = np.unique(v, return_counts=True)
    return int((t * (t - 1) // 2).sum())


def kendall_tau(xs, ys) -> KendallResult:
    """Tau-b with a two-sided p-value.

    The p-value is exact (enumeration over all permutations of ``ys``) for
    n <= 8 and otherwise uses the normal approximation with tie-adjusted
    variance of ``S = concordant - discordant``.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    n = len(x)
    if n != len(y) or n < 3:
        raise ValueError("need two vectors of equal length >= 3")
    sx = _pair_signs(x)
    s = int((sx * _pair_signs(y)).sum())
    n0 = n * (n - 1) // 2
    n1, n2 = _tie_pairs(x), _tie_pairs(y)
    if n1 == n0 or n2 == n0:
        raise ValueError("tau is undefined when one input is constant")
    tau = s / math.sqrt((n0 - n1) * (n0 - n2))
    if n <= 8:
        perms = np.array(list(itertools.permutations(range(n))))
        yp = y[perms]
        i, j = np.triu_indices(n, k=1)
        s_perm = (sx * np.sign(yp[:, i] - yp[:, j])).sum(axis=1)
        p = float(np.mean(np.abs(s_perm) >= abs(s)))
    else:
        p = _normal_p(x, y, s)
    return KendallResult(float(tau), min(1.0, p))


def _normal_p(x: np.ndarray, y: np.ndarray, s: int) -> float:
    n = len(x)
    _, tx = np.unique(x, return_counts=True)
    _, ty = np.unique(y, return_counts=True)
    tx = tx.astype(np.float64)
    ty = ty.astype(np.float64)
    v0 = n * (n - 1) * (2 * n + 5)
    vt = (tx * (tx - 1) * (2 * tx + 5)).sum()
    vu = (ty * (ty - 1) * (2 * ty + 5)).sum()
    v1 = (tx * (tx - 1)).sum() * (ty * (ty - 1)).sum()
    v2 = (tx * (tx - 1) * (tx - 2)).sum() * (ty * (ty - 1) * (ty - 2)).sum()
    var = (v0 - vt - vu) / 18.0 + v1 / (2.0 * n * (n - 1)) + v2 / (9.0 * n * (n - 1) * (n - 2))
    if var <= 0:
        return 1.0
    return float(2.0 * norm.sf(abs(s) / math.sqrt(var)))


# -- shift decomposition ------------------------------------------------------------------


def _decompose(p: np.ndarray) -> dict[str, float]:
    """Terms for a joint table indexed ``[x, y, a, t]``."""
    h = lambda keep: _entropy_of(p, keep, False)  # noqa: E731
    x, xy, xya = (0,), (0, 1), (0, 1, 2)
    covariate = h(x) + h((3,)) - h((0, 3))
    label = h(xy) + h((0, 3)) - h(x) - h((0, 1, 3))
    attribute = h(xya) + h((0, 1, 3)) - h(xy) - h((0, 1, 2, 3))
    total = h(xya) + h((3,)) - h((0, 1, 2, 3))
    return {"total": total, "covariate": covariate, "label": label, "attribute": attribute}


def _feature_codes(train: Dataset, test: Dataset, bins: int) -> tuple[np.ndarray, np.ndarray]:
    if train.is_discrete and test.is_discrete:
        pooled = np.vstack([np.hstack([train.x_z, train.x_a]), np.hstack([test.x_z, test.x_a])])
    else:
        feats = np.vstack([np.hstack([train.x_z, train.x_a]), np.hstack([test.x_z, test.x_a])])
        pooled = np.column_stack([equal_frequency_bins(feats[:, j], bins) for j in range(feats.shape[1])])
    _, codes = np.unique(pooled, axis=0, return_inverse=True)
    codes = codes.ravel()
    return codes[: len(train)], codes[len(train):]


def shift_decomposition(train: Dataset, test: Dataset, bins: int = 4) -> dict[str, float]:
    """Split I(X, Y, A; T) into covariate, label and attribute shift terms.

    ``T`` indicates test membership in the pooled sample. Continuous features
    are binned per column (equal frequency on the pooled data) first.
    """
    if len(train) == 0 or len(test) == 0:
        raise ValueError("empty dataset")
    x_tr, x_te = _feature_codes(train, test, bins)
    x = np.concatenate([x_tr, x_te])
    y = np.concatenate([train.y, test.y])
    a = np.concatenate([train.a, test.a])
    t = np.concatenate([np.zeros(len(train), np.int64), np.ones(len(test), np.int64)])
    return _decompose(contingency(x, y, a, t))


def shift_decomposition_from_joint(p_train, p_test, test_weight: float = 0.5) -> dict[str, float]:
    """Exact terms from two joint tables indexed ``[x, y, a]``."""
    p_train = np.asarray(p_train, dtype=np.float64)
    p_test = np.asarray(p_test, dtype=np.float64)
    p = np.stack([(1 - test_weight) * p_train / p_train.sum(), test_weight * p_test / p_test.sum()], axis=-1)
    return _decompose(p)
