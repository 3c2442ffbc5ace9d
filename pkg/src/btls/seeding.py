"""Counter-based seed derivation.

Every random stream is addressed by ``(master_seed, stream_name, index)`` so
that replica ``k`` of a given experiment never depends on how many other
replicas were requested.
"""

from __future__ import annotations

import zlib
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def derive(master_seed: int, stream: str, *index: int) -> np.random.SeedSequence:
    """Seed sequence for ``stream`` at ``index`` under ``master_seed``."""
    key = (_name_key(stream),) + tuple(int(i) for i in index)
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)


def rng(seed: SeedLike) -> np.random.Generator:
    """Normalise any accepted seed value to a Generator.

    Generators are passed through untouched (the caller owns the stream).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def replica_rng(master_seed: int, stream: str, replica: int) -> np.random.Generator:
    return np.random.default_rng(derive(master_seed, stream, replica))
