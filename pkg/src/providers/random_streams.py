"""Seeded random streams.

Every random draw in the pipeline comes from a numpy ``Generator`` (PCG64)
whose 64-bit seed is derived from the run seed and a path of keys by
splitmix64 mixing. A stream for ``(seed, "ga", generation, index)`` is the same
on every platform and independent of the order in which streams are created,
so parallel work reproduces serial output bit for bit.
"""
import hashlib
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1
MAX_SEED = MASK64

StreamKey = Union[int, str]


def splitmix64(value: int) -> int:
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, str):
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    if key < 0:
        raise ValueError(f"stream keys must be non-negative, got {key}")
    return key & MASK64


def derive_seed(seed: int, *path: StreamKey) -> int:
    """Fold each key of ``path`` into ``seed``; returns a 64-bit seed."""
    state = splitmix64(seed & MASK64)
    for key in path:
        state = splitmix64(state ^ _key_to_int(key))
    return state


def stream(seed: int, *path: StreamKey) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *path)))


def int32_seed(seed: int, *path: StreamKey) -> int:
    """Derived seed narrowed for libraries that only take 32-bit seeds."""
    return derive_seed(seed, *path) & 0x7FFFFFFF
