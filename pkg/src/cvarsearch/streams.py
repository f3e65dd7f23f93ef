"""Deterministic random-stream bookkeeping.

Every stochastic component in this package draws from a numpy Generator that
is derived from a root SeedSequence plus an integer key path.  Streams built
from the same (seed, key path) are bit-identical no matter in which order or
in which process they are created, which is what makes serial and parallel
runs of the same experiment agree byte for byte.
"""

from __future__ import annotations

import numpy as np

__all__ = ["as_seed_sequence", "substream", "generator"]


def as_seed_sequence(seed) -> np.random.SeedSequence:
    """Coerce an int or SeedSequence into a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def substream(seq: np.random.SeedSequence, *key: int) -> np.random.SeedSequence:
    """Child sequence at an explicit key path.

    Unlike SeedSequence.spawn this is stateless: the child depends only on
    the parent's entropy, the parent's own key path, and ``key``.
    """
    return np.random.SeedSequence(
        entropy=seq.entropy, spawn_key=tuple(seq.spawn_key) + tuple(int(k) for k in key)
    )


def generator(seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.default_rng(seq)
