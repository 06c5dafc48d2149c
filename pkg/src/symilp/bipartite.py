"""Bipartite graph encoding of an ILP.

Variable nodes carry the objective coefficient, constraint nodes carry the
right-hand side, and a weighted edge joins variable j to constraint i for
every nonzero A[i, j].  Node and edge permutations follow one convention
package-wide: applying permutation p to a vector y yields y[p], i.e. the
value at position k comes from old position p[k].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BipartiteGraph:
    var_feats: np.ndarray   # [n] objective coefficients
    cons_feats: np.ndarray  # [m] right-hand sides
    edge_cons: np.ndarray   # [E] constraint endpoint, sorted by (cons, var)
    edge_vars: np.ndarray   # [E] variable endpoint
    edge_vals: np.ndarray   # [E] A[i, j]

    def __post_init__(self):
        E = self.edge_vals.shape[0]
        if self.edge_cons.shape != (E,) or self.edge_vars.shape != (E,):
            raise ValueError("edge arrays have inconsistent lengths")
        if E:
            if self.edge_cons.min() < 0 or self.edge_cons.max() >= self.num_cons:
                raise ValueError("edge constraint endpoint out of range")
            if self.edge_vars.min() < 0 or self.edge_vars.max() >= self.num_vars:
                raise ValueError("edge variable endpoint out of range")
            key = self.edge_cons * self.num_vars + self.edge_vars
            if np.any(np.diff(key) <= 0):
                raise ValueError("edges must be sorted by (cons, var) without duplicates")
            if np.any(self.edge_vals == 0.0):
                raise ValueError("zero-weight edge")

    @property
    def num_vars(self) -> int:
        return int(self.var_feats.shape[0])

    @property
    def num_cons(self) -> int:
        return int(self.cons_feats.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.edge_vals.shape[0])

    def var_neighbors(self, j: int) -> list[tuple[int, float]]:
        """Sorted (constraint, weight) pairs adjacent to variable j."""
        mask = self.edge_vars == j
        pairs = sorted(zip(self.edge_cons[mask].tolist(), self.edge_vals[mask].tolist()))
        return pairs

    def cons_neighbors(self, i: int) -> list[tuple[int, float]]:
        """Sorted (variable, weight) pairs adjacent to constraint i."""
        mask = self.edge_cons == i
        return list(zip(self.edge_vars[mask].tolist(), self.edge_vals[mask].tolist()))


def to_bipartite(inst) -> BipartiteGraph:
    """Encode a normalized instance; edges mirror the nonzeros of A exactly."""
    return BipartiteGraph(
        var_feats=np.array(inst.obj, dtype=np.float64),
        cons_feats=np.array(inst.rhs, dtype=np.float64),
        edge_cons=np.array(inst.rows, dtype=np.int64),
        edge_vars=np.array(inst.cols, dtype=np.int64),
        edge_vals=np.array(inst.vals, dtype=np.float64),
    )


def permute(g: BipartiteGraph, pi, sigma) -> BipartiteGraph:
    """Apply variable permutation pi and constraint permutation sigma.

    The result has var_feats'[k] = var_feats[pi[k]], cons_feats'[k] =
    cons_feats[sigma[k]], and an edge of weight w at (i, j) wherever the
    original graph has one at (sigma[i], pi[j]).  Composing two calls equals
    one call with the composed permutations.
    """
    pi = np.asarray(pi, dtype=np.int64)
    sigma = np.asarray(sigma, dtype=np.int64)
    n, m = g.num_vars, g.num_cons
    if sorted(pi.tolist()) != list(range(n)) or sorted(sigma.tolist()) != list(range(m)):
        raise ValueError("not a permutation")
    inv_pi = np.empty(n, dtype=np.int64)
    inv_pi[pi] = np.arange(n)
    inv_sigma = np.empty(m, dtype=np.int64)
    inv_sigma[sigma] = np.arange(m)

    new_cons = inv_sigma[g.edge_cons]
    new_vars = inv_pi[g.edge_vars]
    order = np.lexsort((new_vars, new_cons))
    return BipartiteGraph(
        var_feats=g.var_feats[pi],
        cons_feats=g.cons_feats[sigma],
        edge_cons=new_cons[order],
        edge_vars=new_vars[order],
        edge_vals=g.edge_vals[order].copy(),
    )


def graphs_equal(a: BipartiteGraph, b: BipartiteGraph) -> bool:
    """Exact equality of features, edge pattern, and edge weights."""
    return (
        a.num_vars == b.num_vars
        and a.num_cons == b.num_cons
        and np.array_equal(a.var_feats, b.var_feats)
        and np.array_equal(a.cons_feats, b.cons_feats)
        and np.array_equal(a.edge_cons, b.edge_cons)
        and np.array_equal(a.edge_vars, b.edge_vars)
        and np.array_equal(a.edge_vals, b.edge_vals)
    )
