"""Counter-based random streams for record sampling.

Every record owns an independent stream keyed by ``(seed, record_index)``.
Draw ``j`` of record ``i`` is::

    key_i  = splitmix64(splitmix64(seed) ^ splitmix64(i))
    word_j = splitmix64(key_i + j * 0x9E3779B97F4A7C15)   (mod 2**64)

and the uniform is ``((word_j >> 11) + 0.5) * 2**-53``, which lies strictly
inside (0, 1). Normals use Box-Muller on two consecutive uniform slots.

Because draws are a pure function of the counters, the first ``k`` records
of a sample of size ``n >= k`` do not depend on ``n``, and results are
identical on every platform with IEEE-754 doubles.

Everything that is not per-record sampling (shuffles, splits, weight
initialisation, batch order) uses ``numpy.random.default_rng(seed)``.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser applied elementwise to a uint64 array."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x + _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _seed_word(seed: int) -> np.ndarray:
    return np.array([int(seed) & _MASK64], dtype=np.uint64)


class RecordStreams:
    """Per-record uniform/normal draws for records ``start .. start+n-1``."""

    def __init__(self, seed: int, n: int, start: int = 0):
        idx = np.arange(start, start + n, dtype=np.uint64)
        self.seed = int(seed)
        self.n = n
        self._keys = splitmix64(splitmix64(_seed_word(seed)) ^ splitmix64(idx))

    def uniform(self, slot: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            word = splitmix64(self._keys + np.uint64(slot) * _GAMMA)
        return ((word >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normal(self, slot: int) -> np.ndarray:
        """Standard normal from uniform slots ``slot`` and ``slot + 1``."""
        u1 = self.uniform(slot)
        u2 = self.uniform(slot + 1)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def derive_seed(seed: int, *labels: int | str) -> int:
    """Deterministic 63-bit child seed from a parent seed and labels."""
    word = int(splitmix64(_seed_word(seed))[0])
    for label in labels:
        if isinstance(label, str):
            # FNV-1a, stable across interpreter runs unlike hash()
            h = 0xCBF29CE484222325
            for byte in label.encode():
                h = ((h ^ byte) * 0x100000001B3) & _MASK64
            label = h
        word = int(splitmix64(np.array([(word ^ int(label)) & _MASK64], dtype=np.uint64))[0])
    return word >> 1
