"""Seed handling shared by the samplers.

Counter-based Philox streams keyed through `numpy.random.SeedSequence` make
every replicate's stream a pure function of (master seed, stream tags),
independent of thread scheduling or the order replicates are launched in.
"""

from __future__ import annotations

import numpy as np

__all__ = ["ensure_generator", "stream_generator"]


def ensure_generator(seed_or_rng) -> np.random.Generator:
    """Pass a Generator through; spawn a fresh Philox stream from anything else.

    Accepts an existing `numpy.random.Generator`, an integer seed, or a
    tuple of integers (entropy for a `SeedSequence`).
    """
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_or_rng)))


def stream_generator(master_seed: int, *tags: int) -> np.random.Generator:
    """Independent stream for one unit of work, keyed by (master_seed, *tags)."""
    seq = np.random.SeedSequence((int(master_seed),) + tuple(int(t) for t in tags))
    return np.random.Generator(np.random.Philox(seq))
