"""Seed derivation helpers.

All randomness in the package flows through explicit integer seeds so that
corpora, training batches, and samples are reproducible item by item.
"""
from __future__ import annotations

import numpy as np

_MIX = 0x9E3779B97F4A7C15  # splitmix64 increment


def derive_seed(root: int, *indices: int) -> int:
    """Derive a child seed from a root seed and an index path.

    Stable across runs and platforms; used for per-item seeds in corpora and
    batch sampling (item i of root r always gets derive_seed(r, i)).
    """
    h = (root & 0xFFFFFFFFFFFFFFFF) ^ _MIX
    for ix in indices:
        h = (h + _MIX + (ix & 0xFFFFFFFFFFFFFFFF)) & 0xFFFFFFFFFFFFFFFF
        h ^= h >> 30
        h = (h * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        h ^= h >> 27
        h = (h * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        h ^= h >> 31
    return int(h & 0x7FFFFFFF)


def rng_from(seed: int, *indices: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *indices) if indices else seed)
