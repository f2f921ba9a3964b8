import numpy as np
import pytest

from bias_lab.data import Dataset
from bias_lab.scm import Scm, ScmConfig


def gaussian(**kw) -> Scm:
    return Scm(ScmConfig(**kw))


def discrete(**kw) -> Scm:
    return Scm(ScmConfig(family="discrete", **kw))


@pytest.fixture
def gauss_data():
    s = gaussian(separability_strength=0.8)
    return s.sample(600, 0), s.sample(300, 1)


def make_fixture(n_pos_g1=100, n_other=200, seed=0, d_z=3) -> Dataset:
    """Gaussian dataset with exactly ``n_pos_g1`` positives in group 1."""
    rng = np.random.default_rng(seed)
    n = n_pos_g1 + n_other
    a = np.concatenate([np.ones(n_pos_g1, int), rng.integers(0, 2, n_other)])
    y = np.concatenate([np.ones(n_pos_g1, int), np.zeros(n_other, int)])
    # group-0 positives among the rest
    y[n_pos_g1:][a[n_pos_g1:] == 0] = rng.integers(0, 2, int((a[n_pos_g1:] == 0).sum()))
    perm = rng.permutation(n)
    return Dataset(
        x_z=rng.normal(size=(n, d_z))[perm], x_a=rng.normal(size=(n, 2))[perm],
        a=a[perm], y=y[perm], z=y[perm].copy(),
    )


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, read from test_acceptance outcomes."""
    import re

    found = {}
    for outcome in ("passed", "failed", "error", "xfailed", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_", getattr(rep, "nodeid", ""))
            if not m or (rep.when != "call" and outcome == "passed"):
                continue
            detail = dict(getattr(rep, "user_properties", [])).get("detail", "")
            status = "PASS" if outcome == "passed" else "FAIL"
            found[int(m.group(1))] = f"criterion {m.group(1)}: {status}  {detail}".rstrip()
    if found:
        terminalreporter.section("acceptance criteria")
        for k in sorted(found):
            terminalreporter.write_line(found[k])
