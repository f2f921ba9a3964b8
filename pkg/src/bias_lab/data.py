"""Dataset container and its on-disk format.

A dataset directory holds ``data.csv`` (header ``x_z_*, x_a_*, a, z, y``)
and ``meta.json`` (family, config or ingest descriptor, seed, injection
history). Gaussian features are written with ``%.17g`` so values round-trip
exactly; categorical codes are written as integers. Ingested data without a
latent condition writes an empty ``z`` column.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, NamedTuple

import numpy as np

DATA_FILE = "data.csv"
META_FILE = "meta.json"


class Record(NamedTuple):
    x_z: np.ndarray
    x_a: np.ndarray
    a: int
    z: int | None
    y: int


@dataclass
class Dataset:
    """Columnar records plus provenance.

    ``x_z`` and ``x_a`` are 2-D arrays. For the discrete family they hold
    integer category codes (one column each, plus the collider coordinate
    appended to ``x_a`` when present); ``supports`` gives the number of
    categories per coded column so the design matrix can one-hot them.
    """

    x_z: np.ndarray
    x_a: np.ndarray
    a: np.ndarray
    y: np.ndarray
    z: np.ndarray | None = None
    family: str = "gaussian"
    supports: dict[str, list[int]] = field(default_factory=dict)
    provenance: dict[str, Any] = field(default_factory=dict)
    injection_history: list[dict[str, Any]] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        self.x_z = np.asarray(self.x_z)
        self.x_a = np.asarray(self.x_a)
        if self.x_z.ndim != 2 or self.x_a.ndim != 2:
            raise ValueError("x_z and x_a must be 2-D arrays")
        self.a = np.asarray(self.a, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.z is not None:
            self.z = np.asarray(self.z, dtype=np.int64)
        n = len(self.a)
        for name, arr in (("x_z", self.x_z), ("x_a", self.x_a), ("y", self.y)):
            if arr.shape[0] != n:
                raise ValueError(f"{name} has {arr.shape[0]} rows, expected {n}")
        if self.z is not None and len(self.z) != n:
            raise ValueError("z length mismatch")

    def __len__(self) -> int:
        return len(self.a)

    @property
    def is_synthetic(self) -> bool:
        return self.z is not None

    @property
    def is_discrete(self) -> bool:
        return self.family == "discrete"

    def record(self, i: int) -> Record:
        z = None if self.z is None else int(self.z[i])
        return Record(self.x_z[i], self.x_a[i], int(self.a[i]), z, int(self.y[i]))

    def records(self) -> Iterator[Record]:
        for i in range(len(self)):
            yield self.record(i)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            x_z=self.x_z[idx],
            x_a=self.x_a[idx],
            a=self.a[idx],
            y=self.y[idx],
            z=None if self.z is None else self.z[idx],
            family=self.family,
            supports=copy.deepcopy(self.supports),
            provenance=copy.deepcopy(self.provenance),
            injection_history=copy.deepcopy(self.injection_history),
            seed=self.seed,
        )

    def replace(self, **changes) -> "Dataset":
        fields = dict(
            x_z=self.x_z.copy(),
            x_a=self.x_a.copy(),
            a=self.a.copy(),
            y=self.y.copy(),
            z=None if self.z is None else self.z.copy(),
            family=self.family,
            supports=copy.deepcopy(self.supports),
            provenance=copy.deepcopy(self.provenance),
            injection_history=copy.deepcopy(self.injection_history),
            seed=self.seed,
        )
        fields.update(changes)
        return Dataset(**fields)

    @property
    def input_width(self) -> int:
        return self.design_matrix().shape[1] if len(self) else _design_width(self)

    def design_matrix(self) -> np.ndarray:
        """Float feature matrix fed to networks (one-hot for coded columns)."""
        if not self.is_discrete:
            return np.hstack([self.x_z, self.x_a]).astype(np.float64)
        blocks = []
        for name, arr in (("x_z", self.x_z), ("x_a", self.x_a)):
            sizes = self.supports.get(name, [])
            for j in range(arr.shape[1]):
                col = arr[:, j]
                if j < len(sizes) and sizes[j] > 2:
                    blocks.append(np.eye(sizes[j])[col.astype(np.int64)])
                else:
                    blocks.append(col.astype(np.float64)[:, None])
        return np.hstack(blocks)

    def feature_codes(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer joint codes for x_z and x_a (discrete datasets only)."""
        if not self.is_discrete:
            raise ValueError("feature codes need a discrete dataset")
        return (
            _joint_code(self.x_z, self.supports.get("x_z")),
            _joint_code(self.x_a, self.supports.get("x_a")),
        )

    # -- persistence -----------------------------------------------------

    def header(self) -> list[str]:
        return (
            [f"x_z_{j}" for j in range(self.x_z.shape[1])]
            + [f"x_a_{j}" for j in range(self.x_a.shape[1])]
            + ["a", "z", "y"]
        )

    def save(self, out_dir: str | os.PathLike) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fmt = "%d" if self.is_discrete else "%.17g"
        lines = [",".join(self.header())]
        xz = _format_block(self.x_z, fmt)
        xa = _format_block(self.x_a, fmt)
        zs = [""] * len(self) if self.z is None else [str(v) for v in self.z]
        for i in range(len(self)):
            lines.append(f"{xz[i]},{xa[i]},{self.a[i]},{zs[i]},{self.y[i]}")
        (out / DATA_FILE).write_text("\n".join(lines) + "\n")
        (out / META_FILE).write_text(json.dumps(self.meta(), indent=2, sort_keys=True) + "\n")
        return out

    def meta(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "supports": self.supports,
            "provenance": self.provenance,
            "injection_history": self.injection_history,
            "seed": int(self.seed),
            "n": len(self),
            "d_z_columns": int(self.x_z.shape[1]),
            "d_a_columns": int(self.x_a.shape[1]),
        }

    @classmethod
    def load(cls, in_dir: str | os.PathLike) -> "Dataset":
        src = Path(in_dir)
        meta = json.loads((src / META_FILE).read_text()) if (src / META_FILE).exists() else {}
        lines = (src / DATA_FILE).read_text().splitlines()
        header = lines[0].split(",")
        kz = sum(h.startswith("x_z_") for h in header)
        ka = sum(h.startswith("x_a_") for h in header)
        family = meta.get("family", "gaussian")
        rows = [ln.split(",") for ln in lines[1:] if ln]
        dtype = np.int64 if family == "discrete" else np.float64
        if rows:
            feats = np.array([[float(v) for v in r[: kz + ka]] for r in rows]).astype(dtype)
            a = np.array([int(r[kz + ka]) for r in rows])
            zcol = [r[kz + ka + 1] for r in rows]
            y = np.array([int(r[kz + ka + 2]) for r in rows])
        else:
            feats = np.zeros((0, kz + ka), dtype=dtype)
            a = y = np.zeros(0, dtype=np.int64)
            zcol = []
        z = None if (not zcol or zcol[0] == "") else np.array([int(v) for v in zcol])
        if not rows and meta.get("provenance", {}).get("kind") == "scm":
            z = np.zeros(0, dtype=np.int64)
        return cls(
            x_z=feats[:, :kz],
            x_a=feats[:, kz:],
            a=a,
            y=y,
            z=z,
            family=family,
            supports=meta.get("supports", {}),
            provenance=meta.get("provenance", {"kind": "ingest", "path": str(src)}),
            injection_history=meta.get("injection_history", []),
            seed=int(meta.get("seed", 0)),
        )


def concat(parts: list[Dataset]) -> Dataset:
    first = parts[0]
    z = None if any(p.z is None for p in parts) else np.concatenate([p.z for p in parts])
    return first.replace(
        x_z=np.vstack([p.x_z for p in parts]),
        x_a=np.vstack([p.x_a for p in parts]),
        a=np.concatenate([p.a for p in parts]),
        y=np.concatenate([p.y for p in parts]),
        z=z,
    )


def _format_block(arr: np.ndarray, fmt: str) -> list[str]:
    if arr.shape[1] == 0:
        return [""] * arr.shape[0]
    return [",".join(fmt % v for v in row) for row in arr.tolist()]


def _joint_code(arr: np.ndarray, sizes: list[int] | None) -> np.ndarray:
    """Mixed-radix code of the coded columns (first column least significant)."""
    if not sizes or len(sizes) != arr.shape[1]:
        _, codes = np.unique(arr, axis=0, return_inverse=True)
        return codes.reshape(-1).astype(np.int64)
    code = np.zeros(arr.shape[0], dtype=np.int64)
    radix = 1
    for j, size in enumerate(sizes):
        code += arr[:, j].astype(np.int64) * radix
        radix *= size
    return code


def _design_width(d: Dataset) -> int:
    if not d.is_discrete:
        return d.x_z.shape[1] + d.x_a.shape[1]
    width = 0
    for name, arr in (("x_z", d.x_z), ("x_a", d.x_a)):
        sizes = d.supports.get(name, [])
        for j in range(arr.shape[1]):
            width += sizes[j] if j < len(sizes) and sizes[j] > 2 else 1
    return width
