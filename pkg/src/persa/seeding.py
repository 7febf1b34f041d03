"""Counter-based seed derivation.

Every random draw in the package is keyed by a tuple of non-negative integers
(master seed, sample index, epoch, stream id, ...).  The tuple is folded into
a single 64-bit seed with SplitMix64, and that seed initialises a PCG64
generator.  The scheme is stable across platforms and numpy versions because
both pieces are fully specified integer arithmetic.
"""

from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1
GENERATOR = "splitmix64-fold/numpy.PCG64"

# stream ids keep independent draws for the same sample apart
STREAM_NOISE = 0
STREAM_GAIN = 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output step for state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *keys: int) -> int:
    """Fold ``keys`` into ``master_seed``: h(h(h(s) ^ k0) ^ k1) ...

    All inputs are reduced modulo 2**64; the result is a 64-bit unsigned int.
    """
    if master_seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seeds and keys must be non-negative")
    state = splitmix64(master_seed & MASK64)
    for k in keys:
        state = splitmix64(state ^ (k & MASK64))
    return state


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & MASK64))


def name_key(name: str) -> int:
    """Stable integer key for a string (CRC-32 of its UTF-8 bytes)."""
    return zlib.crc32(name.encode("utf-8"))
