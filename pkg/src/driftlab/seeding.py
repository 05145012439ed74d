"""Deterministic RNG derivation.

All randomness in a run flows from one integer seed.  Sub-streams are
derived by hashing a path of labels into a SeedSequence so that adding
a new consumer never shifts the draws of an existing one.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK = (1 << 63) - 1


def _key(part: int | str) -> int:
    if isinstance(part, bool):
        raise TypeError("bool is not a valid seed path part")
    if isinstance(part, int):
        return part & _MASK
    return zlib.crc32(part.encode("utf-8"))


def seed_sequence(root_seed: int, *path: int | str) -> np.random.SeedSequence:
    """SeedSequence for `root_seed` specialized by a label path."""
    if not isinstance(root_seed, int) or isinstance(root_seed, bool):
        raise TypeError("root_seed must be an int")
    return np.random.SeedSequence([root_seed & _MASK] + [_key(p) for p in path])


def rng_for(root_seed: int, *path: int | str) -> np.random.Generator:
    """Generator derived from `root_seed` and a label path."""
    return np.random.default_rng(seed_sequence(root_seed, *path))
