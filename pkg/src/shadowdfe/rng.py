"""Seeded random streams.

All randomness goes through Philox generators built from a
:class:`numpy.random.SeedSequence`, so a stream is addressed by a root seed
plus an integer path. Nothing touches global RNG state.
"""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream at ``(seed, *path)``."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """A 64-bit child seed, stable across runs and platforms."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
