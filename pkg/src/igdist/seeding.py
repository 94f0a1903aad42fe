"""Deterministic seed derivation for parallel Monte Carlo stages.

Every randomized stage owns a substream addressed by (master seed,
stage tag, replicate index).  Derivation is stateless and bit-exact
across platforms, so results never depend on scheduling or worker
count.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_seed(master: int, tag: str, replicate: int = 0) -> int:
    """Mix (master, tag, replicate) into a 64-bit substream seed."""
    if replicate < 0:
        raise ValueError(f"replicate must be >= 0, got {replicate}")
    z = _splitmix64(master & _MASK)
    z = _splitmix64(z ^ _fnv1a64(tag.encode("utf-8")))
    z = _splitmix64(z ^ (replicate & _MASK))
    return z


def rng_for(master: int, tag: str, replicate: int = 0) -> np.random.Generator:
    """Generator seeded from the derived substream."""
    return np.random.default_rng(derive_seed(master, tag, replicate))
