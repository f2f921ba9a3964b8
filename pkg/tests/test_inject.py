import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from bias_lab.inject import (
    InjectionError, InjectionSpec, apply_injection, inject_presentation, n_selected, select_targets,
    split_dataset,
)
from conftest import discrete, gaussian, make_fixture


def rows(d):
    return np.column_stack([d.x_z, d.x_a, d.a, d.y, d.z])


@pytest.mark.parametrize("kind", ["prevalence", "presentation", "annotation"])
def test_rate_zero_is_identity(kind):
    d = make_fixture()
    out = apply_injection(d, InjectionSpec(kind, rate=0.0))
    assert np.array_equal(rows(out), rows(d))
    assert len(out.injection_history) == 1


def test_floor_convention():
    assert n_selected(0.5, 7) == 3
    assert n_selected(0.29, 100) == 29
    assert n_selected(1.0, 13) == 13
    d = make_fixture(n_pos_g1=7)
    out = apply_injection(d, InjectionSpec("prevalence"))
    assert len(d) - len(out) == 3


def test_prevalence_removes_only_targets():
    d = make_fixture()
    spec = InjectionSpec("prevalence", seed=3)
    chosen = select_targets(d, spec)
    out = apply_injection(d, spec)
    keep = np.setdiff1d(np.arange(len(d)), chosen)
    assert len(chosen) == 50
    assert np.array_equal(rows(out), rows(d)[keep])


def test_annotation_flips_labels_keeps_z():
    d = make_fixture()
    out = apply_injection(d, InjectionSpec("annotation"))
    changed = np.flatnonzero(out.y != d.y)
    assert len(changed) == 50
    assert np.all(out.z[changed] == 1) and np.all(out.y[changed] == 0)
    assert np.all(d.a[changed] == 1)
    g0 = d.a == 0
    assert np.array_equal(rows(out)[g0], rows(d)[g0])


def test_annotation_full_flip():
    d = make_fixture()
    out = apply_injection(d, InjectionSpec("annotation", rate=1.0))
    assert out.y[out.a == 1].sum() == 0


def test_presentation_attenuation_geometry():
    d = make_fixture()
    spec = InjectionSpec("presentation", severity=0.5, seed=1)
    out = inject_presentation(d, spec)
    mean_pos = d.x_z[d.y == 1].mean(axis=0)
    delta = np.linalg.norm(out.x_z - d.x_z, axis=1)
    chosen = select_targets(d, spec)
    expected = np.zeros(len(d))
    expected[chosen] = 0.5 * np.linalg.norm(mean_pos - d.x_z[chosen], axis=1)
    assert np.allclose(delta, expected, rtol=1e-12, atol=1e-15)
    assert np.array_equal(out.x_a, d.x_a) and np.array_equal(out.y, d.y)


def test_presentation_severity_extremes():
    d = make_fixture()
    same = inject_presentation(d, InjectionSpec("presentation", severity=0.0))
    assert np.array_equal(same.x_z, d.x_z)
    full_spec = InjectionSpec("presentation", severity=1.0)
    full = inject_presentation(d, full_spec)
    mean_pos = d.x_z[d.y == 1].mean(axis=0)
    chosen = select_targets(d, full_spec)
    assert np.allclose(full.x_z[chosen], mean_pos, rtol=0, atol=1e-12)


def test_presentation_rejects_discrete():
    d = discrete().sample(500, 0)
    with pytest.raises(InjectionError):
        apply_injection(d, InjectionSpec("presentation"))


def test_empty_selection_error():
    d = make_fixture()
    d = d.subset(np.flatnonzero(~((d.a == 1) & (d.y == 1))))
    with pytest.raises(InjectionError):
        apply_injection(d, InjectionSpec("annotation"))


def test_spec_validation():
    with pytest.raises(InjectionError):
        InjectionSpec("annotation", rate=1.5)
    with pytest.raises(InjectionError):
        InjectionSpec("annotation", target_group=2)


def test_history_order_and_determinism():
    d = make_fixture()
    a = apply_injection(apply_injection(d, InjectionSpec("annotation", seed=1)), InjectionSpec("prevalence", seed=2))
    b = apply_injection(apply_injection(d, InjectionSpec("annotation", seed=1)), InjectionSpec("prevalence", seed=2))
    assert [h["kind"] for h in a.injection_history] == ["annotation", "prevalence"]
    assert np.array_equal(rows(a), rows(b))


@given(n_pos=st.integers(1, 300), rate=st.floats(0, 1), seed=st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_only_target_positives_modified(n_pos, rate, seed):
    d = make_fixture(n_pos_g1=n_pos, n_other=50, seed=seed)
    m = int(((d.a == 1) & (d.y == 1)).sum())
    for kind in ("presentation", "annotation"):
        out = apply_injection(d, InjectionSpec(kind, rate=rate, seed=seed))
        diff = np.any(rows(out) != rows(d), axis=1)
        assert np.all((d.a[diff] == 1) & (d.y[diff] == 1))
        assert diff.sum() <= n_selected(rate, m)
    out = apply_injection(d, InjectionSpec("prevalence", rate=rate, seed=seed))
    assert len(d) - len(out) == n_selected(rate, m)


def test_split_sizes_and_disjointness():
    d = gaussian().sample(1000, 0)
    tr, va, te = split_dataset(d, (0.6, 0.2, 0.2), seed=1)
    assert (len(tr), len(va), len(te)) == (600, 200, 200)
    key = lambda x: {tuple(r) for r in x.x_z.tolist()}
    assert not (key(tr) & key(va)) and not (key(tr) & key(te)) and not (key(va) & key(te))
    assert len(key(tr) | key(va) | key(te)) == 1000


def test_split_all_to_train():
    d = gaussian().sample(100, 0)
    tr, va, te = split_dataset(d, (1.0, 0.0, 0.0))
    assert np.array_equal(tr.x_z, d.x_z)
    assert len(va) == 0 and len(te) == 0


@given(p_a=st.floats(0.1, 0.9), n=st.integers(60, 800), seed=st.integers(0, 100))
@settings(max_examples=30, deadline=None)
def test_split_stratification_within_one_record(p_a, n, seed):
    d = gaussian(p_a=p_a).sample(n, seed)
    assume(min(int(((d.a == a) & (d.y == y)).sum()) for a in (0, 1) for y in (0, 1)) >= 3)
    fr = (0.6, 0.2, 0.2)
    parts = split_dataset(d, fr, seed=seed)
    for f, part in zip(fr, parts):
        for a in (0, 1):
            for y in (0, 1):
                m = int(((d.a == a) & (d.y == y)).sum())
                got = int(((part.a == a) & (part.y == y)).sum())
                assert abs(got - f * m) < 1 + 1e-9


def test_split_rejects_tiny_cells():
    d = make_fixture(n_pos_g1=2, n_other=0)
    with pytest.raises(InjectionError):
        split_dataset(d, (0.6, 0.2, 0.2))
