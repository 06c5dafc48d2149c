"""Deterministic derivation of per-purpose RNG streams from one root seed.

Every random decision in the pipeline (data generation, augmentation draws,
weight init, epoch shuffling) pulls from its own stream, keyed by a purpose
tag and an index.  Streams are independent of evaluation order, so adding or
removing one consumer never shifts the draws of another.
"""

import numpy as np

# Fixed purpose table; never reorder, only append (stream identity depends on it).
_PURPOSES = {
    "datagen": 0,
    "augment": 1,
    "init": 2,
    "shuffle": 3,
    "align": 4,
    "split": 5,
}


def rng_for(root_seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Return the generator for (root_seed, purpose, index)."""
    try:
        pid = _PURPOSES[purpose]
    except KeyError:
        raise ValueError(f"unknown rng purpose: {purpose!r}") from None
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=(pid, int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def seed_for(root_seed: int, purpose: str, index: int = 0) -> int:
    """A 63-bit integer seed derived like :func:`rng_for` (for recording)."""
    rng = rng_for(root_seed, purpose, index)
    return int(rng.integers(0, 2**63 - 1))
