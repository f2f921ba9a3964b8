"""Structural causal models of dataset bias.

Two parametric families share one set of knobs:

Discrete
    ``X_Z`` and ``X_A`` are categorical. ``P(X_Z=k | Z=z)`` mixes a uniform
    table with a uniform table over the ``z``-half of the support (weight
    ``task_signal``); ``P(X_A=k | A=a)`` does the same over the ``a``-half
    with weight ``separability_strength``. Under the presentation mechanism
    group 1 additionally moves mass ``presentation_shift`` onto the extreme
    category of its class half. Every joint is enumerable in exact rational
    arithmetic, which is what the oracles use.

Gaussian
    ``x_z ~ N((2z-1) t e0 + delta a (2z-1) e1, sigma^2 I)`` and
    ``x_a ~ N(s (2a-1) m_A e0, sigma^2 I)`` where ``t`` is ``task_signal``,
    ``m_A`` is ``attribute_signal`` and ``e0, e1`` are the first two basis
    vectors (``e1 = e0`` when ``d_z == 1``).

Labels: ``Y = Z`` flipped with probability ``label_noise``; the annotation
mechanisms add a one-way flip ``1 -> 0`` with probability ``annotation_flip``
for group 1. The causal-annotation variant reads the label off ``X_Z``
instead of ``Z``. The collider variant appends ``a*z`` (plus noise in the
Gaussian family) as the last ``x_a`` coordinate.

All information quantities are in nats.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any

import mpmath
import numpy as np
from scipy.special import ndtr

from .data import Dataset
from .rng import RecordStreams

MAX_DISCRETE_SUPPORT = 16


class Mechanism(str, enum.Enum):
    UNBIASED = "unbiased"
    PRESENTATION = "presentation"
    PREVALENCE = "prevalence"
    ANNOTATION = "annotation"
    CAUSAL_ANNOTATION = "causal_annotation"
    COLLIDER = "collider"


class Family(str, enum.Enum):
    DISCRETE = "discrete"
    GAUSSIAN = "gaussian"


class ConfigError(ValueError):
    """Inconsistent mechanism / parameter combination."""


# Draw slots in each record's stream.
_SLOT_A, _SLOT_Z, _SLOT_NOISE, _SLOT_FLIP, _SLOT_XZ, _SLOT_XA, _SLOT_NORMALS = range(7)


@dataclass(frozen=True)
class ScmConfig:
    mechanism: Mechanism = Mechanism.UNBIASED
    family: Family = Family.GAUSSIAN
    d_z: int = 4
    d_a: int = 2
    p_a: float = 0.5
    base_rates: tuple[float, float] = (0.5, 0.5)
    separability_strength: float = 0.5
    presentation_shift: float = 0.0
    annotation_flip: float = 0.0
    label_noise: float = 0.0
    noise_scale: float = 1.0
    task_signal: float = 0.8
    attribute_signal: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "base_rates", tuple(float(q) for q in self.base_rates))

    def validate(self) -> None:
        m = self.mechanism
        if self.d_z < 1 or self.d_a < 1:
            raise ConfigError("d_z and d_a must be positive")
        q0, q1 = self.base_rates
        for name, p in (("p_a", self.p_a), ("q0", q0), ("q1", q1),
                        ("separability_strength", self.separability_strength),
                        ("annotation_flip", self.annotation_flip)):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name}={p} outside [0, 1]")
        if not 0.0 <= self.label_noise < 0.5:
            raise ConfigError("label_noise must lie in [0, 0.5)")
        if self.presentation_shift < 0:
            raise ConfigError("presentation_shift must be >= 0")
        if self.noise_scale <= 0:
            raise ConfigError("noise_scale must be > 0")
        if q0 != q1 and m is not Mechanism.PREVALENCE:
            raise ConfigError(f"base rates differ but mechanism is {m.value}")
        if self.presentation_shift != 0 and m is not Mechanism.PRESENTATION:
            raise ConfigError(f"presentation_shift > 0 with mechanism {m.value}")
        if self.annotation_flip != 0 and m not in (Mechanism.ANNOTATION, Mechanism.CAUSAL_ANNOTATION):
            raise ConfigError(f"annotation_flip > 0 with mechanism {m.value}")
        if self.family is Family.DISCRETE:
            if self.d_z > MAX_DISCRETE_SUPPORT or self.d_a > MAX_DISCRETE_SUPPORT:
                raise ConfigError(f"discrete supports are limited to {MAX_DISCRETE_SUPPORT}")
            if not 0.0 <= self.task_signal <= 1.0:
                raise ConfigError("discrete task_signal is a mixing weight in [0, 1]")
            if self.presentation_shift > 1.0:
                raise ConfigError("discrete presentation_shift is a mixing weight in [0, 1]")
        elif self.task_signal < 0 or self.attribute_signal < 0:
            raise ConfigError("signal magnitudes must be >= 0")

    def replace(self, **changes) -> "ScmConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["mechanism"] = self.mechanism.value
        d["family"] = self.family.value
        d["base_rates"] = list(self.base_rates)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScmConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown ScmConfig keys: {sorted(unknown)}")
        return cls(**d)


def _exact(x: float) -> Fraction:
    # read knobs as the decimals they were written as, so 0.3 is 3/10
    return Fraction(repr(float(x)))


def _halves(d: int) -> tuple[list[int], list[int]]:
    if d == 1:
        return [0], [0]
    return list(range(d // 2)), list(range(d // 2, d))


def _mixture_table(d: int, weight: Fraction, members: list[int]) -> list[Fraction]:
    uniform = (1 - weight) / d
    return [uniform + (weight / len(members) if k in members else 0) for k in range(d)]


class Scm:
    """Immutable sampler for one mechanism; build with :func:`build_scm`."""

    def __init__(self, config: ScmConfig):
        config.validate()
        self.config = config

    def __repr__(self) -> str:
        return f"Scm({self.config!r})"

    @property
    def mechanism(self) -> Mechanism:
        return self.config.mechanism

    @property
    def family(self) -> Family:
        return self.config.family

    @property
    def has_collider(self) -> bool:
        return self.mechanism is Mechanism.COLLIDER

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        m = self.mechanism
        if m is Mechanism.CAUSAL_ANNOTATION:
            return frozenset({("A", "X_A"), ("Z", "X_Z"), ("X_Z", "Y"), ("A", "Y")})
        e = {("A", "X_A"), ("Z", "X_Z"), ("Z", "Y")}
        extra = {
            Mechanism.PRESENTATION: {("A", "X_Z")},
            Mechanism.PREVALENCE: {("A", "Z")},
            Mechanism.ANNOTATION: {("A", "Y")},
            Mechanism.COLLIDER: {("A", "X_AZ"), ("Z", "X_AZ")},
        }.get(m, set())
        return frozenset(e | extra)

    @property
    def x_a_columns(self) -> int:
        base = 1 if self.family is Family.DISCRETE else self.config.d_a
        return base + (1 if self.has_collider else 0)

    @property
    def x_z_columns(self) -> int:
        return 1 if self.family is Family.DISCRETE else self.config.d_z

    def supports(self) -> dict[str, list[int]]:
        if self.family is not Family.DISCRETE:
            return {}
        xa = [self.config.d_a] + ([2] if self.has_collider else [])
        return {"x_z": [self.config.d_z], "x_a": xa}

    def unbiased_counterpart(self) -> "Scm":
        """Same features and signals with the bias pathway removed.

        Group 1 takes group 0's base rate. The causal-annotation variant keeps
        its X->Y labelling with no group-dependent flips.
        """
        c = self.config
        if self.mechanism is Mechanism.COLLIDER:
            raise ConfigError("the collider variant has no unbiased counterpart with the same features")
        mech = Mechanism.CAUSAL_ANNOTATION if self.mechanism is Mechanism.CAUSAL_ANNOTATION else Mechanism.UNBIASED
        q0 = c.base_rates[0]
        return Scm(c.replace(mechanism=mech, base_rates=(q0, q0), presentation_shift=0.0, annotation_flip=0.0))

    # -- sampling ----------------------------------------------------------

    def sample(self, n: int, seed: int) -> Dataset:
        if n < 1:
            raise ValueError("n must be >= 1")
        c = self.config
        rs = RecordStreams(seed, n)
        a = (rs.uniform(_SLOT_A) < c.p_a).astype(np.int64)
        q = np.where(a == 1, c.base_rates[1], c.base_rates[0])
        z = (rs.uniform(_SLOT_Z) < q).astype(np.int64)
        if self.family is Family.DISCRETE:
            x_z, x_a = self._sample_discrete_features(rs, a, z)
            label_source = np.isin(x_z[:, 0], _halves(c.d_z)[1]).astype(np.int64)
        else:
            x_z, x_a = self._sample_gaussian_features(rs, a, z)
            label_source = (x_z[:, 0] > 0).astype(np.int64)
        base = label_source if self.mechanism is Mechanism.CAUSAL_ANNOTATION else z
        y = np.where(rs.uniform(_SLOT_NOISE) < c.label_noise, 1 - base, base)
        if c.annotation_flip > 0:
            flip = (a == 1) & (base == 1) & (rs.uniform(_SLOT_FLIP) < c.annotation_flip)
            y = np.where(flip, 0, y)
        return Dataset(
            x_z=x_z,
            x_a=x_a,
            a=a,
            y=y.astype(np.int64),
            z=z,
            family=self.family.value,
            supports=self.supports(),
            provenance={"kind": "scm", "config": c.to_dict(), "n": n},
            seed=seed,
        )

    def _sample_discrete_features(self, rs, a, z):
        c = self.config
        n = len(a)
        xz_tables = np.array([[[float(p) for p in self._xz_table(zz, aa)] for aa in (0, 1)] for zz in (0, 1)])
        xa_tables = np.array([[float(p) for p in self._xa_table(aa)] for aa in (0, 1)])
        cdf_z = np.cumsum(xz_tables[z, a], axis=1)
        cdf_a = np.cumsum(xa_tables[a], axis=1)
        u_z = rs.uniform(_SLOT_XZ)[:, None]
        u_a = rs.uniform(_SLOT_XA)[:, None]
        # clip guards the last cdf entry rounding below 1
        x_z = np.minimum((u_z >= cdf_z).sum(axis=1), c.d_z - 1)
        x_a = np.minimum((u_a >= cdf_a).sum(axis=1), c.d_a - 1)
        cols_a = [x_a]
        if self.has_collider:
            cols_a.append(a * z)
        return x_z.reshape(n, 1).astype(np.int64), np.column_stack(cols_a).astype(np.int64)

    def _sample_gaussian_features(self, rs, a, z):
        c = self.config
        n = len(a)
        sigma = c.noise_scale
        sz = 2.0 * z - 1.0
        slot = _SLOT_NORMALS
        x_z = np.empty((n, c.d_z))
        for j in range(c.d_z):
            x_z[:, j] = sigma * rs.normal(slot)
            slot += 2
        x_z[:, 0] += sz * c.task_signal
        if c.presentation_shift:
            shift_col = 1 if c.d_z > 1 else 0
            x_z[:, shift_col] += c.presentation_shift * a * sz
        width_a = c.d_a + (1 if self.has_collider else 0)
        x_a = np.empty((n, width_a))
        for j in range(width_a):
            x_a[:, j] = sigma * rs.normal(slot)
            slot += 2
        x_a[:, 0] += c.separability_strength * (2.0 * a - 1.0) * c.attribute_signal
        if self.has_collider:
            x_a[:, -1] += a * z
        return x_z, x_a

    def resample_x_a(self, a: np.ndarray, z: np.ndarray, seed: int) -> np.ndarray:
        """Fresh draws of ``x_a`` under an intervention setting ``A := a``.

        ``x_z`` is untouched by construction; the collider coordinate uses
        the supplied ``z``.
        """
        c = self.config
        a = np.asarray(a, dtype=np.int64)
        z = np.asarray(z, dtype=np.int64)
        rs = RecordStreams(seed, len(a))
        if self.family is Family.DISCRETE:
            xa_tables = np.array([[float(p) for p in self._xa_table(aa)] for aa in (0, 1)])
            cdf = np.cumsum(xa_tables[a], axis=1)
            x_a = np.minimum((rs.uniform(_SLOT_XA)[:, None] >= cdf).sum(axis=1), c.d_a - 1)
            cols = [x_a] + ([a * z] if self.has_collider else [])
            return np.column_stack(cols).astype(np.int64)
        width = c.d_a + (1 if self.has_collider else 0)
        x_a = np.column_stack([c.noise_scale * rs.normal(_SLOT_NORMALS + 2 * j) for j in range(width)])
        x_a[:, 0] += c.separability_strength * (2.0 * a - 1.0) * c.attribute_signal
        if self.has_collider:
            x_a[:, -1] += a * z
        return x_a

    # -- exact tables (discrete family) ------------------------------------

    def _xz_table(self, z: int, a: int) -> list[Fraction]:
        c = self.config
        lo, hi = _halves(c.d_z)
        table = _mixture_table(c.d_z, _exact(c.task_signal), hi if z else lo)
        if a == 1 and c.presentation_shift:
            delta = _exact(c.presentation_shift)
            extreme = c.d_z - 1 if z else 0
            table = [(1 - delta) * p + (delta if k == extreme else 0) for k, p in enumerate(table)]
        return table

    def _xa_table(self, a: int) -> list[Fraction]:
        c = self.config
        lo, hi = _halves(c.d_a)
        return _mixture_table(c.d_a, _exact(c.separability_strength), hi if a else lo)

    def _p_y1(self, a: int, base: int) -> Fraction:
        c = self.config
        nu = _exact(c.label_noise)
        if base == 0:
            return nu
        p = 1 - nu
        if a == 1:
            p *= 1 - _exact(c.annotation_flip)
        return p

    @cached_property
    def exact_joint(self) -> np.ndarray:
        """Exact ``P(A, Z, X_Z, X_A, Y)`` as an object array of Fractions.

        ``X_A`` is the joint code ``x_a + d_a * c`` with ``c`` the collider
        coordinate (always 0 without a collider).
        """
        if self.family is not Family.DISCRETE:
            raise ConfigError("exact joints exist for the discrete family only")
        c = self.config
        n_c = 2 if self.has_collider else 1
        joint = np.full((2, 2, c.d_z, c.d_a * n_c, 2), Fraction(0), dtype=object)
        p_a = [1 - _exact(c.p_a), _exact(c.p_a)]
        upper = set(_halves(c.d_z)[1])
        for a in (0, 1):
            q = _exact(c.base_rates[a])
            xa_t = self._xa_table(a)
            for z in (0, 1):
                pz = q if z else 1 - q
                xz_t = self._xz_table(z, a)
                col = a * z if self.has_collider else 0
                for xz in range(c.d_z):
                    base = int(xz in upper) if self.mechanism is Mechanism.CAUSAL_ANNOTATION else z
                    py1 = self._p_y1(a, base)
                    for xa in range(c.d_a):
                        w = p_a[a] * pz * xz_t[xz] * xa_t[xa]
                        code = xa + c.d_a * col
                        joint[a, z, xz, code, 1] += w * py1
                        joint[a, z, xz, code, 0] += w * (1 - py1)
        return joint

    @cached_property
    def observed_joint(self) -> np.ndarray:
        """Exact ``P(A, X_Z, X_A, Y)`` (latent ``Z`` summed out)."""
        return self.exact_joint.sum(axis=1)


def build_scm(config: ScmConfig) -> Scm:
    return Scm(config)


def sample_dataset(scm: Scm, n: int, seed: int) -> Dataset:
    return scm.sample(n, seed)


# -- exact information-theoretic helpers ---------------------------------


def conditionally_independent(p_yxz: np.ndarray) -> bool:
    """Exact test of ``Y _||_ X_A | X_Z`` on a Fraction table ``P(X_Z, X_A, Y)``."""
    p_z = p_yxz.sum(axis=(1, 2))
    p_za = p_yxz.sum(axis=2)
    p_zy = p_yxz.sum(axis=1)
    for i, j, k in np.ndindex(p_yxz.shape):
        if p_yxz[i, j, k] * p_z[i] != p_za[i, j] * p_zy[i, k]:
            return False
    return True


def exact_cmi(p_yxz: np.ndarray) -> float:
    """``I(Y; X_A | X_Z)`` for an exact table indexed ``[x_z, x_a, y]``.

    Returns exactly 0.0 when the independence holds in rational arithmetic;
    otherwise the value is evaluated at 40 significant digits so that tiny
    but genuine dependence is never rounded to zero.
    """
    if conditionally_independent(p_yxz):
        return 0.0
    with mpmath.workdps(40):
        p_z = p_yxz.sum(axis=(1, 2))
        p_za = p_yxz.sum(axis=2)
        p_zy = p_yxz.sum(axis=1)
        total = mpmath.mpf(0)
        for i, j, k in np.ndindex(p_yxz.shape):
            p = p_yxz[i, j, k]
            if p == 0:
                continue
            ratio = (p * p_z[i]) / (p_za[i, j] * p_zy[i, k])
            total += _mpf(p) * mpmath.log(_mpf(ratio))
        value = float(total)
    return value if value > 0 else math.ulp(0.0)


def exact_mi(p_xy: np.ndarray) -> float:
    """``I(X; Y)`` for an exact 2-D Fraction table (0.0 iff independent)."""
    p_x = p_xy.sum(axis=1)
    p_y = p_xy.sum(axis=0)
    if all(p_xy[i, j] == p_x[i] * p_y[j] for i, j in np.ndindex(p_xy.shape)):
        return 0.0
    with mpmath.workdps(40):
        total = mpmath.mpf(0)
        for i, j in np.ndindex(p_xy.shape):
            p = p_xy[i, j]
            if p:
                total += _mpf(p) * mpmath.log(_mpf(p / (p_x[i] * p_y[j])))
        value = float(total)
    return value if value > 0 else math.ulp(0.0)


def _mpf(frac: Fraction):
    return mpmath.mpf(frac.numerator) / frac.denominator


def oracle_cmi(scm: Scm) -> float:
    """Exact ``I(Y; X_A | X_Z)`` in nats by full enumeration (discrete only)."""
    if scm.family is not Family.DISCRETE:
        raise ConfigError("oracle_cmi needs the discrete family")
    return exact_cmi(scm.observed_joint.sum(axis=0))


def bayes_group_accuracy(scm: Scm) -> dict[int, float]:
    """Per-group accuracy of the Bayes rule ``1[P(Y=1|X) >= 1/2]`` (discrete only)."""
    j = scm.observed_joint  # [a, xz, xa, y]
    p_x_y = j.sum(axis=0)
    pred = np.vectorize(lambda p1, p0: int(p1 >= p0))(p_x_y[..., 1], p_x_y[..., 0])
    out = {}
    for a in (0, 1):
        correct = sum(j[a, i, k, pred[i, k]] for i, k in np.ndindex(pred.shape))
        out[a] = float(correct / j[a].sum())
    return out


# -- separability ----------------------------------------------------------


def oracle_separability(scm: Scm) -> float:
    """AUC of the Bayes-optimal predictor of ``A`` from ``X``.

    Discrete: exact enumeration with ties counted half. Gaussian: closed form
    when only ``x_a`` depends on ``A``; otherwise the likelihood ratio lives
    on at most three coordinates and the AUC is integrated on a fine grid.
    """
    if scm.family is Family.DISCRETE:
        return _discrete_separability(scm)
    return _gaussian_separability(scm)


def _auc_from_masses(score: np.ndarray, p1: np.ndarray, p0: np.ndarray) -> float:
    uniq, inv = np.unique(score, return_inverse=True)
    m1 = np.bincount(inv, weights=p1, minlength=len(uniq))
    m0 = np.bincount(inv, weights=p0, minlength=len(uniq))
    below = np.concatenate([[0.0], np.cumsum(m0)[:-1]])
    return float(np.sum(m1 * (below + 0.5 * m0)) / (m1.sum() * m0.sum()))


def _discrete_separability(scm: Scm) -> float:
    j = scm.observed_joint.sum(axis=-1)  # [a, xz, xa]
    p1 = j[1].ravel()
    p0 = j[0].ravel()
    tot1, tot0 = sum(p1), sum(p0)
    if tot1 == 0 or tot0 == 0:
        return 0.5
    cells = [(a1 / tot1, a0 / tot0) for a1, a0 in zip(p1, p0) if a1 or a0]
    # group cells by exact likelihood ratio, ordered increasingly
    keyed: dict[Any, list[Fraction]] = {}
    for m1, m0 in cells:
        key = ("inf",) if m0 == 0 else m1 / m0
        acc = keyed.setdefault(key, [Fraction(0), Fraction(0)])
        acc[0] += m1
        acc[1] += m0
    finite = sorted(k for k in keyed if not isinstance(k, tuple))
    order = finite + ([("inf",)] if ("inf",) in keyed else [])
    auc = Fraction(0)
    below = Fraction(0)
    for k in order:
        m1, m0 = keyed[k]
        auc += m1 * (below + m0 / 2)
        below += m0
    return float(auc)


def _gaussian_means(scm: Scm, a: int, z: int) -> dict[str, float]:
    c = scm.config
    sz = 2 * z - 1
    means = {"x_z0": sz * c.task_signal, "x_a0": c.separability_strength * (2 * a - 1) * c.attribute_signal}
    if scm.mechanism is Mechanism.PRESENTATION and c.presentation_shift:
        if c.d_z > 1:
            means["x_z1"] = c.presentation_shift * a * sz
        else:
            means["x_z0"] += c.presentation_shift * a * sz
    if scm.has_collider:
        means["c"] = float(a * z)
    return means


def _gaussian_separability(scm: Scm, cells: float = 2.0e6) -> float:
    c = scm.config
    sigma = c.noise_scale
    coords = ["x_a0"]
    depends_via_z = c.base_rates[0] != c.base_rates[1] or scm.has_collider or (
        scm.mechanism is Mechanism.PRESENTATION and c.presentation_shift > 0
    )
    if not depends_via_z:
        delta = 2.0 * c.separability_strength * c.attribute_signal
        return float(ndtr(delta / (sigma * math.sqrt(2.0))))
    coords = sorted(_gaussian_means(scm, 1, 1))
    n_bins = int(round(cells ** (1.0 / len(coords))))
    comps = {(a, z): _gaussian_means(scm, a, z) for a in (0, 1) for z in (0, 1)}
    edges = {}
    for name in coords:
        mus = [m[name] for m in comps.values()]
        edges[name] = np.linspace(min(mus) - 9 * sigma, max(mus) + 9 * sigma, n_bins + 1)
    dens = {}
    for a in (0, 1):
        total = 0.0
        for z in (0, 1):
            w = c.base_rates[a] if z else 1.0 - c.base_rates[a]
            if w == 0:
                continue
            prob = np.ones(())
            for name in coords:
                cdf = ndtr((edges[name] - comps[a, z][name]) / sigma)
                prob = np.multiply.outer(prob, np.diff(cdf))
            total = total + w * prob
        dens[a] = np.ravel(total)
        dens[a] = dens[a] / dens[a].sum()
    keep = (dens[1] > 0) | (dens[0] > 0)
    p1, p0 = dens[1][keep], dens[0][keep]
    with np.errstate(divide="ignore"):
        score = np.log(p1) - np.log(p0)
    return _auc_from_masses(score, p1, p0)


def attribute_log_likelihood_ratio(scm: Scm, d: Dataset) -> np.ndarray:
    """Analytic ``log P(x | A=1) - log P(x | A=0)`` for every record.

    This is the Bayes score whose AUC :func:`oracle_separability` reports.
    """
    c = scm.config
    if scm.family is Family.DISCRETE:
        xz, xa = d.feature_codes()
        j = scm.observed_joint.sum(axis=-1)
        p1 = np.array([[float(v) for v in row] for row in j[1]]) / float(j[1].sum())
        p0 = np.array([[float(v) for v in row] for row in j[0]]) / float(j[0].sum())
        with np.errstate(divide="ignore"):
            return np.log(p1[xz, xa]) - np.log(p0[xz, xa])
    sigma = c.noise_scale
    cols = {"x_z0": d.x_z[:, 0], "x_a0": d.x_a[:, 0]}
    if c.d_z > 1:
        cols["x_z1"] = d.x_z[:, 1]
    if scm.has_collider:
        cols["c"] = d.x_a[:, -1]
    logp = {}
    for a in (0, 1):
        comps = []
        for z in (0, 1):
            w = c.base_rates[a] if z else 1.0 - c.base_rates[a]
            if w == 0:
                continue
            means = _gaussian_means(scm, a, z)
            means.setdefault("x_z1", 0.0)
            ll = np.full(len(d), math.log(w))
            for name, x in cols.items():
                ll = ll - 0.5 * ((x - means.get(name, 0.0)) / sigma) ** 2
            comps.append(ll)
        logp[a] = np.logaddexp.reduce(np.vstack(comps), axis=0)
    return logp[1] - logp[0]
