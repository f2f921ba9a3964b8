"""Bias injection into existing datasets, and stratified splitting.

Each injection targets the positive records (``y == 1``) of one group.
``floor(rate * m)`` of the ``m`` eligible records are chosen by shuffling the
eligible indices with ``numpy.random.default_rng(seed)`` and taking a prefix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset


class InjectionKind(str, enum.Enum):
    PREVALENCE = "prevalence"
    PRESENTATION = "presentation"
    ANNOTATION = "annotation"


class InjectionError(ValueError):
    pass


@dataclass(frozen=True)
class InjectionSpec:
    kind: InjectionKind
    target_group: int = 1
    rate: float = 0.5
    severity: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", InjectionKind(self.kind))
        if not 0.0 <= self.rate <= 1.0:
            raise InjectionError(f"rate={self.rate} outside [0, 1]")
        if self.target_group not in (0, 1):
            raise InjectionError("target_group must be 0 or 1")
        if self.severity < 0:
            raise InjectionError("severity must be >= 0")

    def describe(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        if self.kind is not InjectionKind.PRESENTATION:
            d.pop("severity")
        return d


def n_selected(rate: float, m: int) -> int:
    # the epsilon absorbs float error in products like 0.29 * 100
    return min(m, math.floor(rate * m + 1e-9))


def select_targets(d: Dataset, spec: InjectionSpec) -> np.ndarray:
    """Sorted indices of the records an injection modifies or removes."""
    eligible = np.flatnonzero((d.a == spec.target_group) & (d.y == 1))
    if len(eligible) == 0:
        raise InjectionError(f"no positive records in group {spec.target_group}")
    k = n_selected(spec.rate, len(eligible))
    chosen = np.random.default_rng(spec.seed).permutation(eligible)[:k]
    return np.sort(chosen)


def _history(d: Dataset, spec: InjectionSpec, m: int, k: int) -> list[dict]:
    entry = spec.describe()
    entry.update(n_eligible=int(m), n_selected=int(k))
    return d.injection_history + [entry]


def _check_kind(spec: InjectionSpec, kind: InjectionKind) -> None:
    if spec.kind is not kind:
        raise InjectionError(f"expected a {kind.value} spec, got {spec.kind.value}")


def inject_prevalence(d: Dataset, spec: InjectionSpec) -> Dataset:
    _check_kind(spec, InjectionKind.PREVALENCE)
    chosen = select_targets(d, spec)
    m = int(((d.a == spec.target_group) & (d.y == 1)).sum())
    keep = np.ones(len(d), dtype=bool)
    keep[chosen] = False
    out = d.subset(np.flatnonzero(keep))
    out.injection_history = _history(d, spec, m, len(chosen))
    return out


def inject_presentation(d: Dataset, spec: InjectionSpec) -> Dataset:
    """Attenuate ``x_z`` of the chosen records toward the positive-class mean."""
    _check_kind(spec, InjectionKind.PRESENTATION)
    if d.is_discrete:
        raise InjectionError("presentation injection is undefined for categorical features")
    chosen = select_targets(d, spec)
    m = int(((d.a == spec.target_group) & (d.y == 1)).sum())
    mean_pos = d.x_z[d.y == 1].mean(axis=0)
    x_z = d.x_z.copy()
    if spec.severity != 0:
        x_z[chosen] = x_z[chosen] + spec.severity * (mean_pos - x_z[chosen])
    return d.replace(x_z=x_z, injection_history=_history(d, spec, m, len(chosen)))


def inject_annotation(d: Dataset, spec: InjectionSpec) -> Dataset:
    _check_kind(spec, InjectionKind.ANNOTATION)
    chosen = select_targets(d, spec)
    m = int(((d.a == spec.target_group) & (d.y == 1)).sum())
    y = d.y.copy()
    y[chosen] = 0
    return d.replace(y=y, injection_history=_history(d, spec, m, len(chosen)))


_INJECTORS = {
    InjectionKind.PREVALENCE: inject_prevalence,
    InjectionKind.PRESENTATION: inject_presentation,
    InjectionKind.ANNOTATION: inject_annotation,
}


def apply_injection(d: Dataset, spec: InjectionSpec) -> Dataset:
    return _INJECTORS[spec.kind](d, spec)


# -- splitting ---------------------------------------------------------------


def _largest_remainder(total: int, fractions: np.ndarray) -> np.ndarray:
    raw = fractions * total
    counts = np.floor(raw + 1e-9).astype(int)
    rest = total - counts.sum()
    order = sorted(range(len(fractions)), key=lambda j: (-(raw[j] - counts[j]), j))
    for j in order[:rest]:
        counts[j] += 1
    return counts


def _cell_allocation(cell_sizes: list[int], fractions: np.ndarray) -> np.ndarray:
    """Integer (cell x split) table with exact split totals.

    Every entry is the floor of ``fraction * cell_size`` or one more, so each
    cell's share per split is within one record of its proportional value.
    """
    n = sum(cell_sizes)
    targets = _largest_remainder(n, fractions)
    table = np.array([np.floor(fractions * m + 1e-9).astype(int) for m in cell_sizes]).reshape(
        len(cell_sizes), len(fractions)
    )
    row_need = np.array(cell_sizes) - table.sum(axis=1)
    col_need = targets - table.sum(axis=0)
    active = fractions > 0
    # Gale-Ryser greedy: largest row demand first, into largest column demands
    for i in sorted(range(len(cell_sizes)), key=lambda i: (-row_need[i], i)):
        cols = sorted((j for j in range(len(fractions)) if active[j]), key=lambda j: (-col_need[j], j))
        for j in cols[: row_need[i]]:
            table[i, j] += 1
            col_need[j] -= 1
        row_need[i] = 0
    if np.any(col_need != 0):
        raise InjectionError("could not allocate a stratified split")
    return table


def split_dataset(
    d: Dataset,
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
    stratify_on: tuple[str, ...] = ("a", "y"),
) -> tuple[Dataset, ...]:
    """Stratified, seeded partition into ``len(fractions)`` datasets."""
    fr = np.asarray(fractions, dtype=float)
    if np.any(fr < 0) or not math.isclose(fr.sum(), 1.0, abs_tol=1e-9):
        raise InjectionError("split fractions must be non-negative and sum to 1")
    n_parts = int((fr > 0).sum())
    keys = [getattr(d, name) for name in stratify_on]
    if keys:
        cells = sorted(set(zip(*(k.tolist() for k in keys))))
        members = [np.flatnonzero(np.all([k == v for k, v in zip(keys, cell)], axis=0)) for cell in cells]
    else:
        members = [np.arange(len(d))]
    for idx in members:
        if len(idx) < n_parts:
            raise InjectionError(f"a stratification cell has {len(idx)} records for {n_parts} splits")
    table = _cell_allocation([len(m) for m in members], fr)
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[] for _ in fr]
    for row, idx in zip(table, members):
        shuffled = rng.permutation(idx)
        bounds = np.concatenate([[0], np.cumsum(row)])
        for j in range(len(fr)):
            parts[j].append(shuffled[bounds[j]: bounds[j + 1]])
    return tuple(
        d.subset(np.sort(np.concatenate(p)) if p else np.zeros(0, dtype=int)) for p in parts
    )
