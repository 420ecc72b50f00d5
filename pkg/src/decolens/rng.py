"""Seedable random streams for reproducible ensembles.

Every run draws from its own PCG64 stream (numpy's 128-bit permuted
congruential generator, fixed explicitly rather than via ``default_rng``).
Stream ``r`` of an ensemble with seed ``s`` is seeded by
``SeedSequence(entropy=s, spawn_key=(r,))``, so streams depend only on
(seed, run index) and never on scheduling order.  Only ``random()`` doubles
are drawn; all other variates are derived from them in this package.
"""

from __future__ import annotations

import numpy as np


class RandomStream:
    def __init__(self, seed: int, run_index: int = 0):
        self.seed = int(seed)
        self.run_index = int(run_index)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.run_index,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def random(self, size=None):
        """Uniform doubles on [0, 1)."""
        return self._gen.random(size)

    def uniform(self, low: float, high: float, size=None):
        return low + (high - low) * self._gen.random(size)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, run_index={self.run_index})"
