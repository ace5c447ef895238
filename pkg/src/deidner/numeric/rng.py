"""Seeded random streams.

All randomness in the package comes from numpy's PCG64 bit generator.  The
algorithm is pinned here on purpose: swapping it changes every initialisation
and every shuffle.
"""
from __future__ import annotations

import numpy as np

ALGORITHM = "PCG64"


class SeededRng:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return low + (high - low) * self.generator.random(shape)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size=size)

    def random(self, shape=None):
        return self.generator.random(shape)

    def child(self, offset: int) -> "SeededRng":
        """An independent stream at a fixed offset from this seed."""
        return SeededRng(self.seed + offset)
