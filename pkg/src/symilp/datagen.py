"""Bin packing instance generation with exactly solved labels.

The benchmark family assigns items with integer sizes to identical bins,
minimizing the number of opened bins.  Identical bins (and any items that
share a size) make the formulation highly symmetric, which is the point of
the exercise.

Variable order: assignment variables x[i, j] row-major by item, then one
open indicator per bin.  Row order: one equality per item (assign it
exactly once), then one capacity row per bin.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from . import seeding
from .errors import BudgetError
from .ilp import ILPInstance, Solution, build_instance, solve_exact

log = logging.getLogger(__name__)


@dataclass
class BppConfig:
    num_items: int = 6
    num_bins: int = 6
    capacity: int = 9
    size_low: int = 3
    size_high: int = 7
    num_instances: int = 100
    seed: int = 0
    node_budget: int = 2_000_000


@dataclass
class GeneratedInstance:
    index: int
    sizes: np.ndarray
    instance: ILPInstance
    solution: Solution


def bpp_dims(num_items: int, num_bins: int) -> tuple[int, int, int]:
    """(variables, formulation rows, normalized rows) for the encoding."""
    num_vars = num_items * num_bins + num_bins
    formulation_rows = num_items + num_bins
    normalized_rows = 2 * num_items + num_bins  # each equality becomes two rows
    return num_vars, formulation_rows, normalized_rows


def build_bpp_instance(sizes, num_bins: int, capacity: float) -> ILPInstance:
    sizes = np.asarray(sizes, dtype=np.float64)
    items = len(sizes)
    if items == 0 or num_bins <= 0:
        raise ValueError("need at least one item and one bin")
    if np.any(sizes <= 0) or np.any(sizes > capacity):
        raise ValueError("item sizes must lie in (0, capacity]")

    def x(i, j):
        return i * num_bins + j

    open_var = items * num_bins
    rows = []
    for i in range(items):
        rows.append(("=", 1.0, [(x(i, j), 1.0) for j in range(num_bins)]))
    for j in range(num_bins):
        terms = [(x(i, j), float(sizes[i])) for i in range(items)]
        terms.append((open_var + j, -float(capacity)))
        rows.append(("<=", 0.0, terms))
    obj = [0.0] * (items * num_bins) + [1.0] * num_bins
    return build_instance(items * num_bins + num_bins, rows, obj)


def gen_bpp(config: BppConfig) -> list[GeneratedInstance]:
    """Generate instances with optimal labels, one rng stream per index.

    An instance whose exact solve does not finish within the node budget is
    skipped with a warning; later indices are drawn until the requested
    count is reached, so the kept instances stay reproducible regardless of
    the budget.
    """
    out = []
    for index in itertools.count():
        if len(out) >= config.num_instances:
            break
        if index >= 10 * config.num_instances + 100:
            raise BudgetError("too many instances skipped; raise the node budget")
        rng = seeding.rng_for(config.seed, "datagen", index)
        sizes = rng.integers(config.size_low, config.size_high + 1, size=config.num_items)
        inst = build_bpp_instance(sizes, config.num_bins, config.capacity)
        sol = solve_exact(inst, node_budget=config.node_budget)
        if sol.status != "optimal":
            log.warning("skipping instance %d: solve ended %s (exhausted=%s)",
                        index, sol.status, sol.exhausted)
            continue
        out.append(GeneratedInstance(index, sizes, inst, sol))
    return out


def split_dataset(items: list, train_fraction: float, seed: int) -> tuple[list, list]:
    """Deterministic shuffled split; the first chunk trains."""
    if not 0.0 <= train_fraction <= 1.0:
        raise ValueError("train_fraction must be in [0, 1]")
    order = seeding.rng_for(seed, "split").permutation(len(items))
    cut = int(round(train_fraction * len(items)))
    train = [items[i] for i in order[:cut]]
    test = [items[i] for i in order[cut:]]
    if items and (not train or not test):
        log.warning("split produced an empty side (train=%d, test=%d)", len(train), len(test))
    return train, test
