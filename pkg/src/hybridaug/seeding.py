"""Derived random generators for schedule-independent reproducibility.

Every randomized operation takes either an explicit 64-bit seed or a
generator derived from one through `derived_rng`. Parallel workers must
derive per-item generators from (seed, item index) keys so the output is
identical regardless of worker count or evaluation order.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & _MASK64


def derived_rng(seed: int, *keys) -> np.random.Generator:
    """Return a Generator keyed by (seed, *keys).

    Keys may be integers or strings; strings are hashed with CRC-32 so the
    derivation is stable across processes and platforms.
    """
    entropy = [int(seed) & _MASK64] + [_key_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
