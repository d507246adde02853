"""Deterministic derivation of per-client, per-round random streams.

Every random draw in the simulator comes from a PCG64 generator seeded by
mixing integer components (global seed, client id, round index, stream tag)
through a splitmix64 hash. Adding or removing one consumer never perturbs the
streams of the others, and results are reproducible bit-for-bit.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Stream tags keep unrelated consumers of the same (seed, client, round)
# components from colliding.
ROLE_STREAM = 0x01
INIT_STREAM = 0x02
TRAIN_STREAM = 0x03
PARTITION_STREAM = 0x04
DATA_STREAM = 0x05
RUN_STREAM = 0x06


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix(*parts: int) -> int:
    """Fold integer components into one 64-bit seed. Order-sensitive."""
    h = 0
    for part in parts:
        h = _splitmix64(h ^ (int(part) & _MASK64))
    return h


def generator(*parts: int) -> np.random.Generator:
    """PCG64 generator seeded from the mixed components."""
    return np.random.Generator(np.random.PCG64(mix(*parts)))
