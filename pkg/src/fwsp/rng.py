"""Counter-based random number generation.

Every draw is a pure function of ``(seed, counter)`` in the SplitMix64
construction: draw ``n`` of stream ``seed`` is ``mix64(seed + (n+1)*GOLDEN)``.
Replication streams are therefore independent of execution order and can be
replayed exactly.  Normal variates use the Marsaglia polar method, which only
touches ``log``/``sqrt``; the same compiled routine backs both the plain
NumPy code paths and the jitted experiment kernels, so the two produce
bit-identical streams.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)
_U53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, inline="always")
def uniform01(seed, counter):
    """Uniform draw in [0, 1) at index ``counter`` of stream ``seed``."""
    z = (seed + (counter + _ONE) * _GOLDEN) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return float(z >> np.uint64(11)) * _U53


@njit(cache=True)
def fill_normals(seed, counter, out):
    """Fill ``out`` with standard normals; returns the advanced counter.

    Polar-method pairs are generated in counter order; when ``out`` has odd
    length the second member of the final pair is discarded, so the counter
    advance depends only on the draw sequence, not on array layout.
    """
    n = out.shape[0]
    c = counter
    i = 0
    while i < n:
        while True:
            u = 2.0 * uniform01(seed, c) - 1.0
            c = c + _ONE
            v = 2.0 * uniform01(seed, c) - 1.0
            c = c + _ONE
            s = u * u + v * v
            if 0.0 < s < 1.0:
                break
        f = math.sqrt(-2.0 * math.log(s) / s)
        out[i] = u * f
        i += 1
        if i < n:
            out[i] = v * f
            i += 1
    return c


class CounterRng:
    """Deterministic stream of draws addressed by an incrementing counter."""

    def __init__(self, seed: int):
        self.seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.counter = np.uint64(0)

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        self.counter = fill_normals(self.seed, self.counter, out)
        return out

    def normal(self) -> float:
        return float(self.normals(1)[0])

    def uniform(self) -> float:
        u = uniform01(self.seed, self.counter)
        self.counter = self.counter + _ONE
        return float(u)
