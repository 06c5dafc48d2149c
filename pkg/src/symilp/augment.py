"""Random feature augmentation schemes over variable nodes.

Five schemes, ordered by search-space size: `noaug` (all zeros), `orbitplus`
(one draw per linked block, copied across its rows), `orbit` (independent
draw per nontrivial orbit), `position` (random permutation of 1..n), and
`uniform` (iid U[0,1)).  The orbit draw is sequential sampling without
replacement from {1..|O|}, visiting the orbit in ascending index order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SCHEMES = ("noaug", "uniform", "position", "orbit", "orbitplus")


@dataclass(frozen=True)
class AugmentedFeature:
    z: np.ndarray
    scheme: str
    seed: int


def _draw_without_replacement(rng, count):
    pool = list(range(1, count + 1))
    out = []
    for _ in range(count):
        idx = int(rng.integers(0, len(pool)))
        out.append(pool.pop(idx))
    return out


def augment(scheme, num_vars, orbits=None, blocks=None, seed=0) -> AugmentedFeature:
    """Draw one augmentation vector; deterministic given (scheme, seed)."""
    n = int(num_vars)
    rng = np.random.default_rng(int(seed))
    z = np.zeros(n, dtype=np.float64)
    if scheme == "noaug":
        pass
    elif scheme == "uniform":
        z = rng.random(n)
    elif scheme == "position":
        z = rng.permutation(np.arange(1, n + 1)).astype(np.float64)
    elif scheme == "orbit":
        if orbits is None:
            raise ValueError("orbit scheme needs an orbit partition")
        for orb in orbits.orbits:
            if len(orb) < 2:
                continue
            vals = _draw_without_replacement(rng, len(orb))
            for i, v in zip(sorted(orb), vals):
                z[i] = v
    elif scheme == "orbitplus":
        if blocks is None:
            raise ValueError("orbitplus scheme needs linked orbit blocks")
        for blk in blocks.blocks:
            cols = blk.alignment.shape[1]
            vals = _draw_without_replacement(rng, cols)
            for row in blk.alignment:
                for i, v in zip(row, vals):
                    z[int(i)] = v
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return AugmentedFeature(z=z, scheme=scheme, seed=int(seed))


def space_cardinality_log(scheme, num_vars, orbits=None, blocks=None) -> float:
    """Natural log of the number of distinct augmentation vectors."""
    n = int(num_vars)
    if scheme == "noaug":
        return 0.0
    if scheme == "uniform":
        return math.inf
    if scheme == "position":
        return math.log(math.factorial(n))
    if scheme == "orbit":
        if orbits is None:
            raise ValueError("orbit scheme needs an orbit partition")
        return float(sum(math.log(math.factorial(len(o))) for o in orbits.orbits))
    if scheme == "orbitplus":
        if blocks is None:
            raise ValueError("orbitplus scheme needs linked orbit blocks")
        return float(
            sum(math.log(math.factorial(b.alignment.shape[1])) for b in blocks.blocks)
        )
    raise ValueError(f"unknown scheme {scheme!r}")


def check_distinguishability(z, orbits) -> bool:
    """True iff z separates every nontrivial orbit (all values distinct)."""
    z = np.asarray(z)
    for orb in orbits.orbits:
        if len(orb) < 2:
            continue
        if len({float(z[i]) for i in orb}) != len(orb):
            return False
    return True
