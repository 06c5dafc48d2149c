"""ILP data model, JSON parsing, evaluation, and a small exact solver.

Instances are stored in a normalized form: every constraint is `<=`.  An
equality contributes two rows (the original and its negation), a `>=` row is
negated.  Normalization canonicalizes -0.0 to +0.0 so that value equality and
bit-level grouping agree downstream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParseError

SENSES = ("<=", "=", ">=")

_FEAS_EPS = 1e-9


@dataclass(frozen=True)
class ILPInstance:
    """Integer linear program min c.x s.t. A x <= b, lb <= x <= ub, x integer.

    The coefficient matrix is sparse, stored as parallel (row, col, val)
    arrays sorted by (row, col) with no duplicates and no explicit zeros.
    Arrays are frozen after construction.
    """

    num_vars: int
    num_cons: int
    obj: np.ndarray
    rhs: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    var_lower: np.ndarray
    var_upper: np.ndarray

    def __post_init__(self):
        n, m = self.num_vars, self.num_cons
        if n < 1:
            raise ParseError("instance needs at least one variable")
        if m < 0:
            raise ParseError("negative constraint count")
        if self.obj.shape != (n,) or self.var_lower.shape != (n,) or self.var_upper.shape != (n,):
            raise ParseError("objective/bounds length does not match num_vars")
        if self.rhs.shape != (m,):
            raise ParseError("rhs length does not match num_cons")
        nnz = self.vals.shape[0]
        if self.rows.shape != (nnz,) or self.cols.shape != (nnz,):
            raise ParseError("triplet arrays have inconsistent lengths")
        if nnz:
            if self.rows.min() < 0 or self.rows.max() >= m:
                raise ParseError("row index out of range")
            if self.cols.min() < 0 or self.cols.max() >= n:
                raise ParseError("column index out of range")
            key = self.rows.astype(np.int64) * n + self.cols
            if np.any(np.diff(key) <= 0):
                raise ParseError("triplets must be sorted by (row, col) without duplicates")
            if np.any(self.vals == 0.0):
                raise ParseError("explicit zero coefficient")
        for a in (self.obj, self.rhs, self.vals):
            if a.size and not np.all(np.isfinite(a)):
                raise ParseError("non-finite coefficient")
        if np.any(self.var_lower > self.var_upper):
            raise ParseError("variable lower bound exceeds upper bound")
        for a in (self.obj, self.rhs, self.rows, self.cols, self.vals,
                  self.var_lower, self.var_upper):
            a.setflags(write=False)

    @property
    def nnz(self) -> int:
        return int(self.vals.shape[0])


@dataclass
class Solution:
    """Solver output.  `values` is meaningful unless status is 'infeasible'.

    status: 'optimal' (proven), 'feasible' (budget ran out with an incumbent),
    or 'infeasible' (proven when `exhausted` is False; otherwise it only means
    no feasible point was found before the budget ran out).
    """

    status: str
    objective: float
    values: np.ndarray | None
    exhausted: bool = False


def build_instance(num_vars, rows_spec, obj, lb=None, ub=None) -> ILPInstance:
    """Construct a normalized instance.

    rows_spec: iterable of (sense, rhs, terms) with terms a list of
    (col, coeff) pairs, 0-based columns.  Equalities expand to the `<=` row
    followed by its negation; `>=` rows are negated in place.
    """
    n = int(num_vars)
    obj = np.asarray(obj, dtype=np.float64) + 0.0
    if lb is None:
        lb = np.zeros(n, dtype=np.int64)
    if ub is None:
        ub = np.ones(n, dtype=np.int64)
    lb = np.asarray(lb, dtype=np.int64)
    ub = np.asarray(ub, dtype=np.int64)

    out_rows, out_cols, out_vals, out_rhs = [], [], [], []

    def emit(terms, rhs, negate):
        i = len(out_rhs)
        sign = -1.0 if negate else 1.0
        seen = set()
        for col, coeff in terms:
            col = int(col)
            if col in seen:
                raise ParseError(f"duplicate term for column {col}")
            seen.add(col)
            if not (0 <= col < n):
                raise ParseError(f"column index {col} out of range")
            v = sign * float(coeff)
            if v == 0.0:
                continue
            out_rows.append(i)
            out_cols.append(col)
            out_vals.append(v + 0.0)
        out_rhs.append(sign * float(rhs) + 0.0)

    for sense, rhs, terms in rows_spec:
        if sense == "<=":
            emit(terms, rhs, negate=False)
        elif sense == ">=":
            emit(terms, rhs, negate=True)
        elif sense == "=":
            emit(terms, rhs, negate=False)
            emit(terms, rhs, negate=True)
        else:
            raise ParseError(f"unknown sense {sense!r}")

    m = len(out_rhs)
    rows = np.asarray(out_rows, dtype=np.int64)
    cols = np.asarray(out_cols, dtype=np.int64)
    vals = np.asarray(out_vals, dtype=np.float64)
    rhs = np.asarray(out_rhs, dtype=np.float64)
    if rows.size:
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
    return ILPInstance(n, m, obj, rhs, rows, cols, vals, lb, ub)


def parse_instance(text: str) -> ILPInstance:
    """Parse the instance JSON format into a normalized ILPInstance."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ParseError("top-level value must be an object")
    for key in ("n", "m", "obj", "rows"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise ParseError("field 'n' must be a positive integer")
    if not isinstance(doc["m"], int) or doc["m"] < 0:
        raise ParseError("field 'm' must be a non-negative integer")
    rows = doc["rows"]
    if not isinstance(rows, list):
        raise ParseError("field 'rows' must be a list")
    if len(rows) != doc["m"]:
        raise ParseError(f"field 'm' is {doc['m']} but {len(rows)} rows given")
    obj = doc["obj"]
    if not isinstance(obj, list) or len(obj) != n:
        raise ParseError("field 'obj' must be a list of length n")

    rows_spec = []
    for idx, row in enumerate(rows):
        if not isinstance(row, dict):
            raise ParseError(f"row {idx} must be an object")
        for key in ("sense", "rhs", "terms"):
            if key not in row:
                raise ParseError(f"row {idx} missing field {key!r}")
        if row["sense"] not in SENSES:
            raise ParseError(f"row {idx} has unknown sense {row['sense']!r}")
        terms = row["terms"]
        if not isinstance(terms, list):
            raise ParseError(f"row {idx} field 'terms' must be a list")
        pairs = []
        for t in terms:
            if not isinstance(t, list) or len(t) != 2:
                raise ParseError(f"row {idx} has a malformed term (want [col, coeff])")
            pairs.append((t[0], t[1]))
        rows_spec.append((row["sense"], row["rhs"], pairs))

    lb = doc.get("lb")
    ub = doc.get("ub")
    for name, arr in (("lb", lb), ("ub", ub)):
        if arr is not None and (not isinstance(arr, list) or len(arr) != n):
            raise ParseError(f"field {name!r} must be a list of length n")
    try:
        return build_instance(n, rows_spec, obj, lb=lb, ub=ub)
    except ParseError:
        raise
    except (TypeError, ValueError) as e:
        raise ParseError(str(e)) from None


def instance_to_doc(inst: ILPInstance) -> dict:
    """Serialize to the instance JSON document (normalized rows, all `<=`)."""
    rows = []
    for i in range(inst.num_cons):
        mask = inst.rows == i
        terms = [[int(c), float(v)] for c, v in zip(inst.cols[mask], inst.vals[mask])]
        rows.append({"sense": "<=", "rhs": float(inst.rhs[i]), "terms": terms})
    return {
        "n": inst.num_vars,
        "m": inst.num_cons,
        "obj": [float(v) for v in inst.obj],
        "rows": rows,
        "lb": [int(v) for v in inst.var_lower],
        "ub": [int(v) for v in inst.var_upper],
    }


def evaluate(inst: ILPInstance, x) -> tuple[float, float]:
    """Return (objective value, total constraint violation) at integer point x.

    Violation is the sum of positive parts of A x - b.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.num_vars,):
        raise ValueError("point has wrong length")
    ax = np.zeros(inst.num_cons, dtype=np.float64)
    np.add.at(ax, inst.rows, inst.vals * x[inst.cols])
    viol = np.maximum(ax - inst.rhs, 0.0).sum()
    return float(inst.obj @ x), float(viol)


def solve_exact(inst: ILPInstance, node_budget: int = 1_000_000) -> Solution:
    """Depth-first branch and bound with bound propagation.

    Branches variables in index order trying values in ascending order, so
    the search (and the returned optimum among ties) is deterministic.  The
    incumbent is replaced only on strict improvement.  Feasibility pruning
    uses per-row minimum activities; the objective bound prunes and tightens
    domains once an incumbent exists.  No LP relaxation is involved.

    Exceeding `node_budget` stops the search: the best incumbent (if any) is
    returned with status 'feasible', otherwise status 'infeasible' with
    exhausted=True, which is *not* a proof of infeasibility.
    """
    n, m = inst.num_vars, inst.num_cons
    c = [float(v) for v in inst.obj]
    b = [float(v) for v in inst.rhs]
    lo = [int(v) for v in inst.var_lower]
    hi = [int(v) for v in inst.var_upper]

    # var -> [(row, coeff)], row -> [(var, coeff)]
    var_rows: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    row_vars: list[list[tuple[int, float]]] = [[] for _ in range(m)]
    for r, j, a in zip(inst.rows, inst.cols, inst.vals):
        var_rows[int(j)].append((int(r), float(a)))
        row_vars[int(r)].append((int(j), float(a)))

    def mc(a, l, h):
        return a * l if a > 0 else a * h

    minact = [0.0] * m
    for r in range(m):
        minact[r] = sum(mc(a, lo[j], hi[j]) for j, a in row_vars[r])
    minobj = sum(mc(c[j], lo[j], hi[j]) for j in range(n))

    best_obj = math.inf
    best_x: list[int] | None = None
    trail: list[tuple[int, int, int]] = []
    nodes = 0
    state = {"minobj": minobj}
    obj_items = [(j, c[j]) for j in range(n) if c[j] != 0.0]

    class _Budget(Exception):
        pass

    def set_bounds(j, new_lo, new_hi):
        # Adjust cached minimum activities by the change in j's contribution.
        trail.append((j, lo[j], hi[j]))
        for r, a in var_rows[j]:
            minact[r] += mc(a, new_lo, new_hi) - mc(a, lo[j], hi[j])
        state["minobj"] += mc(c[j], new_lo, new_hi) - mc(c[j], lo[j], hi[j])
        lo[j], hi[j] = new_lo, new_hi

    def undo(mark):
        while len(trail) > mark:
            j, old_lo, old_hi = trail.pop()
            for r, a in var_rows[j]:
                minact[r] += mc(a, old_lo, old_hi) - mc(a, lo[j], hi[j])
            state["minobj"] += mc(c[j], old_lo, old_hi) - mc(c[j], lo[j], hi[j])
            lo[j], hi[j] = old_lo, old_hi

    def tighten_from_row(rhs_limit, act, items):
        """Bound-consistency pass over one row; returns (feasible, changed vars).

        `act` stays valid across tightenings: a positive coefficient only
        lowers the upper bound (min contribution set by the lower bound) and
        a negative one only raises the lower bound.
        """
        if act > rhs_limit + _FEAS_EPS:
            return False, ()
        changed = []
        for j, a in items:
            l, h = lo[j], hi[j]
            if l == h:
                continue
            allowance = rhs_limit - (act - mc(a, l, h))
            if a > 0:
                nh = math.floor(allowance / a + _FEAS_EPS)
                if nh < h:
                    if nh < l:
                        return False, changed
                    set_bounds(j, l, nh)
                    changed.append(j)
            else:
                nl = math.ceil(allowance / a - _FEAS_EPS)
                if nl > l:
                    if nl > h:
                        return False, changed
                    set_bounds(j, nl, h)
                    changed.append(j)
        return True, changed

    def propagate(seed_rows):
        """Fixpoint of row and objective tightening; False on dead end."""
        pending = set(seed_rows)
        use_obj = best_x is not None
        pending_obj = use_obj
        while pending or pending_obj:
            if pending:
                r = pending.pop()
                ok, changed = tighten_from_row(b[r], minact[r], row_vars[r])
            else:
                pending_obj = False
                ok, changed = tighten_from_row(
                    best_obj - _FEAS_EPS, state["minobj"], obj_items)
            if not ok:
                return False
            for j in changed:
                for r2, _ in var_rows[j]:
                    if minact[r2] > b[r2] + _FEAS_EPS:
                        return False
                    pending.add(r2)
                if use_obj and c[j] != 0.0:
                    pending_obj = True
            if use_obj and state["minobj"] > best_obj - _FEAS_EPS:
                return False
        return True

    def search():
        nonlocal nodes, best_obj, best_x
        nodes += 1
        if nodes > node_budget:
            raise _Budget
        j = -1
        for k in range(n):
            if lo[k] < hi[k]:
                j = k
                break
        if j < 0:
            obj = state["minobj"]
            if obj < best_obj - _FEAS_EPS:
                best_obj = obj
                best_x = list(lo)
            return
        for v in range(lo[j], hi[j] + 1):
            mark = len(trail)
            set_bounds(j, v, v)
            feas = all(minact[r] <= b[r] + _FEAS_EPS for r, _ in var_rows[j])
            if feas and best_x is not None and state["minobj"] > best_obj - _FEAS_EPS:
                feas = False
            if feas:
                feas = propagate([r for r, _ in var_rows[j]])
            if feas:
                search()
            undo(mark)

    exhausted = False
    # Root propagation may already prove infeasibility or fix everything.
    if all(minact[r] <= b[r] + _FEAS_EPS for r in range(m)) and propagate(range(m)):
        try:
            search()
        except _Budget:
            exhausted = True

    if best_x is None:
        return Solution("infeasible", math.inf, None, exhausted=exhausted)
    status = "feasible" if exhausted else "optimal"
    values = np.asarray(best_x, dtype=np.int64)
    return Solution(status, float(best_obj), values, exhausted=exhausted)
