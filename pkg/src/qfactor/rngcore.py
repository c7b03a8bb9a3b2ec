"""Deterministic, splittable random number generation.

All randomness in the package flows through here so that a single master
seed fixes every output bit-for-bit, independently of scheduling.

The generator algorithm is fixed and versioned: child seeds are derived
with ``numpy.random.SeedSequence`` (its documented hash-mixing of the
entropy pool with the spawn key), and streams are PCG64 generators.
Normal variates use numpy's ziggurat implementation; exponentials use
the inverse CDF -log1p(-u); chi-square with integer degrees of freedom
is a sum of squared normals; Student t is normal / sqrt(chi2/df).
Changing any of these choices is a breaking change for reproducibility.
"""

from __future__ import annotations

import numpy as np

_SEED_MASK = (1 << 64) - 1


def child_seed(master: int, *indices: int) -> int:
    """Derive a 64-bit child seed from a master seed and an index path.

    Pure function of (master, indices); distinct paths give distinct
    streams and the derivation is order-sensitive.
    """
    ss = np.random.SeedSequence(entropy=master & _SEED_MASK, spawn_key=tuple(indices))
    state = ss.generate_state(2, np.uint32)
    return (int(state[0]) << 32) | int(state[1])


def stream(seed: int, *indices: int) -> "Stream":
    """Open the random stream at the given seed path."""
    return Stream(child_seed(seed, *indices) if indices else seed)


class Stream:
    """A value-owned random stream (PCG64) with the documented transforms."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _SEED_MASK
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.random(size) * (high - low) + low

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def exponential(self, size=None):
        # Inverse CDF; -log1p(-u) is exact for u in [0, 1).
        return -np.log1p(-self._gen.random(size))

    def chi2(self, df: int, size=None):
        if df != int(df) or df < 1:
            raise ValueError("chi2 transform requires integer df >= 1")
        z = self._gen.standard_normal((int(df),) + _shape(size))
        return np.sum(z * z, axis=0).reshape(() if size is None else size)

    def student_t(self, df: int, size=None):
        z = self._gen.standard_normal(size)
        c = self.chi2(df, size)
        # Guard against an exact-zero denominator (possible only through
        # floating underflow; keeps t_1 draws finite).
        c = np.maximum(c, np.finfo(float).tiny)
        return z / np.sqrt(c / df)


def _shape(size):
    if size is None:
        return (1,)
    if np.isscalar(size):
        return (int(size),)
    return tuple(size)
