"""Deterministic 64-bit key derivation for random streams.

A key is built by folding integers into a seed with the SplitMix64 mixer::

    key = mix64(seed)
    for part in parts:
        key = mix64(key ^ mix64(part + GOLDEN))

All arithmetic is modulo 2**64.  Distinct ``(seed, parts...)`` tuples give
independent-looking keys, so every (stream, realization, trial) triple owns
its own row of random numbers regardless of how work is scheduled.
"""

from __future__ import annotations

import numpy as np

from ._accel import mix64_numpy

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# stream tags
PHI = 1
TRIAL = 2
TRAIN = 3
SIMULATE = 4


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *parts: int) -> int:
    key = mix64(seed)
    for part in parts:
        key = mix64(key ^ mix64(part + _GOLDEN))
    return key


def derive_keys(base: int, indices) -> np.ndarray:
    """Vectorized ``derive_key(base_seed..., i)`` for the final part ``i``.

    ``base`` must already be a derived key; element ``j`` of the result equals
    ``mix64(base ^ mix64(indices[j] + GOLDEN))``.
    """
    idx = np.asarray(indices, dtype=np.uint64)
    inner = mix64_numpy(idx + np.uint64(_GOLDEN))
    return mix64_numpy(np.uint64(base) ^ inner)
