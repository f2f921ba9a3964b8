from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bias_lab.metrics import auc_score
from bias_lab.scm import (
    ConfigError, Mechanism, Scm, ScmConfig, attribute_log_likelihood_ratio, bayes_group_accuracy,
    build_scm, conditionally_independent, exact_cmi, oracle_cmi, oracle_separability, sample_dataset,
)
from bias_lab.verify import random_discrete_config
from conftest import discrete, gaussian


def brute_cmi(p):
    """Triple loop over p[xz, xa, y] in floats."""
    p = np.array([[[float(v) for v in row] for row in plane] for plane in p])
    total = 0.0
    for i in range(p.shape[0]):
        pz = p[i].sum()
        for j in range(p.shape[1]):
            for k in range(p.shape[2]):
                if p[i, j, k] > 0:
                    total += p[i, j, k] * np.log(p[i, j, k] * pz / (p[i, j].sum() * p[i, :, k].sum()))
    return total


EDGES = {
    "unbiased": {("A", "X_A"), ("Z", "X_Z"), ("Z", "Y")},
    "presentation": {("A", "X_A"), ("Z", "X_Z"), ("Z", "Y"), ("A", "X_Z")},
    "prevalence": {("A", "X_A"), ("Z", "X_Z"), ("Z", "Y"), ("A", "Z")},
    "annotation": {("A", "X_A"), ("Z", "X_Z"), ("Z", "Y"), ("A", "Y")},
}


@pytest.mark.parametrize("mech,kw", [
    ("unbiased", {}), ("presentation", {"presentation_shift": 0.5}),
    ("prevalence", {"base_rates": (0.3, 0.6)}), ("annotation", {"annotation_flip": 0.5}),
])
def test_graph_matches_mechanism(mech, kw):
    assert EDGES[mech] <= set(build_scm(ScmConfig(mechanism=mech, **kw)).edges)


def test_collider_appends_interaction_column():
    s = discrete(mechanism="collider")
    d = s.sample(500, 0)
    assert d.x_a.shape[1] == 2
    assert np.array_equal(d.x_a[:, 1], d.a * d.z)


@pytest.mark.parametrize("cfg", [
    dict(presentation_shift=0.5),
    dict(annotation_flip=0.2),
    dict(base_rates=(0.3, 0.6)),
    dict(separability_strength=1.5),
    dict(family="discrete", d_z=17),
])
def test_rejects_inconsistent_configs(cfg):
    with pytest.raises(ConfigError):
        build_scm(ScmConfig(**cfg))


def test_unbiased_discrete_cmi_is_exactly_zero():
    s = discrete(base_rates=(0.3, 0.3))
    assert oracle_cmi(s) == 0.0
    p = s.observed_joint.sum(axis=0)  # [xz, xa, y]
    assert conditionally_independent(p)


def test_prevalence_read_back():
    s = discrete(mechanism="prevalence", base_rates=(0.3, 0.6), separability_strength=1.0)
    j = s.exact_joint.sum(axis=(2, 3, 4))  # [a, z]
    diff = j[1, 1] / j[1].sum() - j[0, 1] / j[0].sum()
    assert diff == Fraction(3, 10)
    assert oracle_cmi(s) > 0


def test_presentation_cmi_positive_and_zero_at_delta_zero():
    assert oracle_cmi(discrete(mechanism="presentation", presentation_shift=0.5)) > 0
    assert oracle_cmi(discrete(mechanism="presentation", presentation_shift=0.0)) == 0.0


def test_oracle_cmi_rejects_gaussian():
    with pytest.raises(ConfigError):
        oracle_cmi(gaussian())


@pytest.mark.parametrize("mech,knob,grid", [
    ("presentation", "presentation_shift", [0.0, 0.25, 0.5, 0.75, 1.0]),
    ("annotation", "annotation_flip", [0.0, 0.25, 0.5, 0.75, 1.0]),
    ("causal_annotation", "annotation_flip", [0.0, 0.25, 0.5, 0.75, 1.0]),
    ("prevalence", "base_rates", [(0.5, 0.5), (0.5, 0.4), (0.5, 0.3), (0.5, 0.2), (0.5, 0.1)]),
])
def test_oracle_cmi_monotone_in_bias_knob(mech, knob, grid):
    vals = [oracle_cmi(discrete(mechanism=mech, separability_strength=0.8, **{knob: v})) for v in grid]
    assert vals[0] == pytest.approx(0.0, abs=1e-15)
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0


def test_exact_cmi_matches_brute_force():
    rng = np.random.default_rng(0)
    for mech in Mechanism:
        s = Scm(random_discrete_config(rng, mech))
        p = s.observed_joint.sum(axis=0)
        assert exact_cmi(p) == pytest.approx(brute_cmi(p), abs=1e-12)


@given(st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_oracle_cmi_nonnegative(seed):
    rng = np.random.default_rng(seed)
    mech = list(Mechanism)[seed % len(Mechanism)]
    assert oracle_cmi(Scm(random_discrete_config(rng, mech))) >= 0


def test_sampling_determinism_and_marginals():
    s = gaussian(p_a=0.5)
    a1, a2 = s.sample(10_000, 7), s.sample(10_000, 7)
    assert np.array_equal(a1.x_z, a2.x_z) and np.array_equal(a1.y, a2.y)
    big = sample_dataset(s, 100_000, 1)
    # 4.4 standard errors at n=1e5
    assert abs(big.a.mean() - 0.5) < 0.01


def test_annotation_flip_read_back():
    d = gaussian(mechanism="annotation", annotation_flip=0.5).sample(100_000, 3)
    sel = (d.z == 1) & (d.a == 1)
    assert abs((d.y[sel] == 0).mean() - 0.5) < 0.02
    assert np.all(d.y[d.a == 0] == d.z[d.a == 0])


@pytest.mark.parametrize("family", ["discrete", "gaussian"])
def test_separability_monotone_in_s(family):
    vals = [oracle_separability(Scm(ScmConfig(family=family, separability_strength=s)))
            for s in np.linspace(0, 1, 6)]
    assert vals[0] == pytest.approx(0.5, abs=1e-12)
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_separability_extremes_discrete():
    assert oracle_separability(discrete(separability_strength=0.0)) == 0.5
    assert oracle_separability(discrete(separability_strength=1.0, d_a=2)) == 1.0


@pytest.mark.parametrize("kw", [
    dict(separability_strength=0.5),
    dict(mechanism="prevalence", base_rates=(0.5, 0.2), separability_strength=0.5),
    dict(mechanism="presentation", presentation_shift=1.0, separability_strength=0.3),
])
def test_gaussian_separability_matches_monte_carlo(kw):
    s = gaussian(**kw)
    d = s.sample(1_000_000, 11)
    mc = auc_score(attribute_log_likelihood_ratio(s, d), d.a)
    assert abs(oracle_separability(s) - mc) < 0.005


def test_discrete_separability_matches_sample_auc():
    s = discrete(mechanism="prevalence", base_rates=(0.5, 0.2), separability_strength=0.6)
    d = s.sample(200_000, 2)
    mc = auc_score(attribute_log_likelihood_ratio(s, d), d.a)
    assert abs(oracle_separability(s) - mc) < 0.005


def test_resample_x_a_follows_intervention():
    s = gaussian(separability_strength=1.0)
    d = s.sample(20_000, 0)
    ones = np.ones(len(d), dtype=np.int64)
    xa = s.resample_x_a(ones, d.z, seed=5)
    assert abs(xa[:, 0].mean() - 2.0) < 0.05


def test_bayes_group_accuracy_unbiased_is_symmetric():
    acc = bayes_group_accuracy(discrete(task_signal=0.8))
    assert acc[0] == acc[1]
    assert 0.5 < acc[0] <= 1.0
