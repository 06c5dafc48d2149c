"""Symmetry-aware label alignment and evaluation metrics.

A symmetry of the instance maps optimal solutions to optimal solutions, so a
label is only defined up to its orbit under the formulation-symmetry group.
Alignment replaces a label with the orbit member closest (in l1 distance) to
the predicted probabilities; the evaluation metrics below are computed
against aligned labels so a prediction is never penalized for landing on a
symmetric twin of the reference solution.

Three alignment strategies, chosen per instance:

* assignment: when the group acts on each linked orbit block as the full
  symmetric group on its columns (and independently across blocks), the
  optimum decomposes into one linear assignment problem per block.  Exact.
* enumeration: breadth-first closure of the label vector under the group
  generators, capped; the best candidate is picked by scanning.  Exact when
  the closure fits under the cap.
* greedy: steepest-descent over generator moves with random restarts.  Used
  only when the closure blows past the cap; may miss the optimum.

All strategies keep the current label when it already achieves the optimal
cost (within 1e-9), which makes alignment idempotent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import seeding
from .errors import InvariantError
from .ilp import evaluate
from .permgroup import group_order
from .symmetry import SymmetryDetection

COST_SLACK = 1e-9


@dataclass
class AlignmentResult:
    label: np.ndarray
    cost: float
    method: str   # identity | assignment | enumeration | greedy
    exact: bool


def _apply(perm: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Move the value at position k to position perm[k]."""
    out = np.empty_like(values)
    out[perm] = values
    return out


def _var_generators(detection: SymmetryDetection) -> list[np.ndarray]:
    return [np.asarray(pi, dtype=np.int64) for pi, _ in detection.generators.generators]


def _l1_cost(probs: np.ndarray, label: np.ndarray) -> float:
    return float(np.abs(probs - label).sum())


def _column_action_is_full_product(detection: SymmetryDetection) -> bool:
    """True when the group acts on block columns as the full direct product.

    Each generator permutes the columns of every block consistently across
    rows; mapping generators to their concatenated column permutations gives
    a faithful picture of how labels can move.  The per-block assignment
    decomposition is exact iff that image is the whole product of symmetric
    groups, which holds iff its order equals the product of factorials.
    """
    blocks = detection.blocks.blocks
    if not blocks:
        return True
    offsets = []
    total = 0
    for blk in blocks:
        offsets.append(total)
        total += blk.alignment.shape[1]

    taus = []
    for pi in _var_generators(detection):
        tau = np.empty(total, dtype=np.int64)
        for blk, off in zip(blocks, offsets):
            row = blk.alignment[0]
            col_of = {int(v): j for j, v in enumerate(row)}
            for j, var in enumerate(row):
                image = int(pi[var])
                if image not in col_of:
                    raise InvariantError("generator moves a block row out of itself")
                tau[off + j] = off + col_of[image]
        taus.append(tuple(int(x) for x in tau))

    want = 1
    for blk in blocks:
        want *= math.factorial(blk.alignment.shape[1])
    return group_order(taus, total) == want


def _assignment_align(probs, label, detection) -> np.ndarray:
    """Per-block minimum-cost column assignment (valid under the product check)."""
    aligned = label.copy()
    for blk in detection.blocks.blocks:
        M = blk.alignment
        c = M.shape[1]
        # cost[j, k]: put the label values of source column j at position k
        cost = np.abs(probs[M][:, None, :] - label[M][:, :, None]).sum(axis=0)
        rows, cols = linear_sum_assignment(cost)
        tau = np.empty(c, dtype=np.int64)
        tau[rows] = cols
        aligned[M[:, tau]] = label[M]
    return aligned


def _label_orbit(label, gens, cap: int):
    """All distinct permuted labels reachable from `label`, or None past cap.

    Breadth-first closure under the generators; for a finite group this is
    exactly the orbit of the label vector.  Discovery order is deterministic.
    """
    seen = {label.tobytes()}
    frontier = [label]
    out = [label]
    while frontier:
        nxt = []
        for vec in frontier:
            for p in gens:
                cand = _apply(p, vec)
                key = cand.tobytes()
                if key not in seen:
                    if len(seen) >= cap:
                        return None
                    seen.add(key)
                    nxt.append(cand)
                    out.append(cand)
        frontier = nxt
    return np.array(out)


def _greedy_align(probs, label, gens, seed: int, restarts: int = 8):
    """Steepest descent over single generator moves, with random restarts.

    Each restart descends for at most 3x the number of generators steps,
    so the search depth scales with the group presentation size.
    """
    rng = seeding.rng_for(seed, "align")
    moves = list(gens) + [np.argsort(p) for p in gens]
    depth = 3 * len(gens)
    best = label
    best_cost = _l1_cost(probs, label)
    for restart in range(restarts):
        cur = label
        if restart > 0:
            for _ in range(int(rng.integers(2, 12))):
                cur = _apply(moves[int(rng.integers(len(moves)))], cur)
        cur_cost = _l1_cost(probs, cur)
        for _ in range(depth):
            cands = [_apply(p, cur) for p in moves]
            costs = [_l1_cost(probs, c) for c in cands]
            k = int(np.argmin(costs))
            if costs[k] < cur_cost - 1e-12:
                cur, cur_cost = cands[k], costs[k]
            else:
                break
        if cur_cost < best_cost - 1e-12:
            best, best_cost = cur, cur_cost
    return best


def _pick(probs, label, candidate, method, exact) -> AlignmentResult:
    """Prefer the current label whenever it matches the candidate's cost."""
    cand_cost = _l1_cost(probs, candidate)
    cur_cost = _l1_cost(probs, label)
    if cur_cost <= cand_cost + COST_SLACK:
        return AlignmentResult(label.copy(), cur_cost, method, exact)
    return AlignmentResult(candidate, cand_cost, method, exact)


def closest_symmetric_label(
    probs,
    label,
    detection: SymmetryDetection,
    enum_cap: int = 20000,
    seed: int = 0,
) -> AlignmentResult:
    """Orbit member of `label` with minimal l1 distance to `probs`."""
    probs = np.asarray(probs, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    if probs.shape != label.shape:
        raise ValueError("probs and label must have the same shape")
    gens = _var_generators(detection)
    if not gens or not detection.blocks.blocks:
        return AlignmentResult(label.copy(), _l1_cost(probs, label), "identity", True)

    if _column_action_is_full_product(detection):
        cand = _assignment_align(probs, label, detection)
        return _pick(probs, label, cand, "assignment", True)

    orbit = _label_orbit(label, gens, enum_cap)
    if orbit is not None:
        return _enumeration_pick(probs, label, orbit)
    cand = _greedy_align(probs, label, gens, seed)
    return _pick(probs, label, cand, "greedy", False)


def _enumeration_pick(probs, label, orbit) -> AlignmentResult:
    costs = np.abs(orbit - probs[None, :]).sum(axis=1)
    best = float(costs.min())
    cur_cost = _l1_cost(probs, label)
    if cur_cost <= best + COST_SLACK:
        return AlignmentResult(label.copy(), cur_cost, "enumeration", True)
    eligible = np.flatnonzero(costs <= best + COST_SLACK)
    idx = min(eligible, key=lambda i: tuple(orbit[i]))
    return AlignmentResult(orbit[idx].copy(), float(costs[idx]), "enumeration", True)


def make_aligner(entries: dict, enum_cap: int = 20000, seed: int = 0):
    """Training-loop aligner with per-instance caching.

    `entries` maps instance id to (instance, detection).  Returns a callable
    `aligner(sample, probs) -> label` for the trainer.  The label's orbit is
    fixed across epochs (alignment never leaves it), so the expensive parts,
    the product check and the enumerated orbit, are computed once per
    instance on first use.

    Every aligned label is checked to preserve the original label's
    objective value and constraint violation; a drift means the symmetry
    data does not belong to the instance, and raises InvariantError.
    """
    cache: dict = {}

    def prepare(instance_id, label):
        inst, detection = entries[instance_id]
        gens = _var_generators(detection)
        state = {"inst": inst, "detection": detection, "gens": gens}
        state["reference"] = evaluate(inst, label)
        if not gens or not detection.blocks.blocks:
            state["method"] = "identity"
        elif _column_action_is_full_product(detection):
            state["method"] = "assignment"
        else:
            orbit = _label_orbit(np.asarray(label, dtype=np.float64), gens, enum_cap)
            if orbit is None:
                state["method"] = "greedy"
            else:
                state["method"] = "enumeration"
                state["orbit"] = orbit
        return state

    def aligner(sample, probs):
        state = cache.get(sample.instance_id)
        if state is None:
            state = prepare(sample.instance_id, sample.label)
            cache[sample.instance_id] = state
        label = np.asarray(sample.label, dtype=np.float64)
        probs = np.asarray(probs, dtype=np.float64)
        method = state["method"]
        if method == "identity":
            return label
        if method == "assignment":
            result = _pick(probs, label, _assignment_align(probs, label, state["detection"]),
                           "assignment", True)
        elif method == "enumeration":
            result = _enumeration_pick(probs, label, state["orbit"])
        else:
            result = _pick(probs, label, _greedy_align(probs, label, state["gens"], seed),
                           "greedy", False)
        ref_obj, ref_viol = state["reference"]
        obj, viol = evaluate(state["inst"], result.label)
        if abs(obj - ref_obj) > 1e-9 or abs(viol - ref_viol) > 1e-9:
            raise InvariantError(
                f"aligned label changed objective {ref_obj}->{obj} "
                f"or violation {ref_viol}->{viol}"
            )
        return result.label

    return aligner


def top_m_error(probs, label, m_percent: float) -> float:
    """Error of the m% most confidently rounded predictions.

    Confidence is the distance from the predicted probability to its nearest
    integer; the m% of variables with the smallest distance (rounded half
    up, stable order on ties) are compared, after rounding, against the
    label.  Monotone in m because the selection is a prefix of one sort.
    """
    probs = np.asarray(probs, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    n = probs.shape[0]
    count = int(math.floor(m_percent * n / 100.0 + 0.5))
    count = max(0, min(n, count))
    if count == 0:
        return 0.0
    rounded = np.rint(probs)
    order = np.argsort(np.abs(rounded - probs), kind="stable")
    chosen = order[:count]
    return float(np.abs(rounded[chosen] - label[chosen]).sum())


def rounded_violation(inst, probs) -> float:
    """Total constraint violation of the rounded prediction."""
    probs = np.asarray(probs, dtype=np.float64)
    x = np.clip(np.rint(probs), inst.var_lower, inst.var_upper)
    _, viol = evaluate(inst, x)
    return viol


@dataclass
class PredictionMetrics:
    top_m: dict
    violation: float
    alignment: AlignmentResult


def evaluate_prediction(
    inst,
    detection: SymmetryDetection,
    probs,
    label,
    m_values=(30, 50, 70, 90),
    enum_cap: int = 20000,
    seed: int = 0,
) -> PredictionMetrics:
    """Align the label to the prediction, then score it."""
    result = closest_symmetric_label(probs, label, detection, enum_cap=enum_cap, seed=seed)
    top = {int(m): top_m_error(probs, result.label, m) for m in m_values}
    return PredictionMetrics(top, rounded_violation(inst, probs), result)
