"""Seeded random-substream derivation.

Every randomized routine in this package draws from a generator derived
from a 64-bit master seed plus a small integer key path.  The mixing
function is fixed: ``numpy.random.SeedSequence(entropy=seed,
spawn_key=path)`` hashes ``(seed, *path)`` with its counter-based
entropy expansion, and the result feeds a PCG64 stream.  Identical
``(seed, *path)`` always yields an identical stream; distinct key paths
yield statistically independent streams.  Harness code documents the
key path it uses next to each call site.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "check_rng"]


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for master ``seed`` and integer key ``path``."""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    key = tuple(int(p) for p in path)
    if any(p < 0 for p in key):
        raise ValueError(f"substream path must be nonnegative ints, got {path}")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))


def check_rng(rng) -> np.random.Generator:
    """Coerce ``rng`` (Generator, int seed, or None) to a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, (int, np.integer)):
        return substream(int(rng))
    raise TypeError(f"expected numpy Generator, int seed, or None, got {type(rng).__name__}")
