"""Deterministic seed plumbing shared by all stochastic components."""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _entropy(parts) -> list[int]:
    # SeedSequence rejects negative entropy; mask to 64-bit words.
    return [int(p) & _MASK for p in parts]


def make_rng(*parts: int) -> np.random.Generator:
    """Generator seeded from one or more integers, stable across platforms."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(parts)))


def derive_seed(*parts: int) -> int:
    """Collapse integer parts into a single 64-bit seed."""
    ss = np.random.SeedSequence(_entropy(parts))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent child generators, e.g. for restart loops."""
    ss = np.random.SeedSequence(_entropy([seed]))
    return [np.random.default_rng(child) for child in ss.spawn(count)]
