"""Named random substreams derived from one experiment seed.

Every source of randomness (weight init, dropout masks, batch shuffles,
search sampling, synthetic noise) pulls a generator from
``seed_stream(seed, *names)`` so reruns with the same seed reproduce
every draw regardless of execution order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part: str | int) -> int:
    if isinstance(part, int):
        return part & 0xFFFFFFFF
    return zlib.crc32(part.encode("utf-8"))


def seed_stream(root_seed: int, *names: str | int) -> np.random.Generator:
    """Generator for the substream identified by ``names`` under the seed."""
    key = tuple(_key(n) for n in names)
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=key))
