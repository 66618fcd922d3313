"""Counter-based splittable random streams.

Every random draw in the package comes from ``make_rng(seed, *path)``. The path
names the consumer (e.g. ``("factorize", restart)``) so streams are independent
of execution order and thread count.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def make_rng(seed: int, *path) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
