"""Formulation symmetry detection on the bipartite encoding.

A formulation symmetry is a variable permutation pi for which some
constraint permutation sigma preserves the objective, right-hand side,
variable bounds, and every coefficient: A[sigma(i), pi(j)] = A[i, j].

Detection searches the colored bipartite graph with iterated color
refinement plus individualization.  Candidate automorphisms come from
comparing each search leaf against the first leaf and are verified exactly
before use, so emitted generators are always true symmetries; the node
budget only limits completeness, never soundness.  Reported orbits are the
exact orbits of the group generated by the emitted generators.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError
from . import permgroup


@dataclass
class SymmetryGenerators:
    """Verified generators (pi, sigma) and the log10 order of <pi parts>."""

    generators: list[tuple[np.ndarray, np.ndarray]]
    group_order_log10: float
    partial: bool = False


@dataclass
class OrbitPartition:
    orbit_of: np.ndarray          # [n] orbit id per variable
    orbits: list[list[int]]       # sorted members, listed by smallest member

    def nontrivial(self) -> list[int]:
        return [k for k, orb in enumerate(self.orbits) if len(orb) >= 2]


@dataclass
class OrbitBlock:
    orbit_ids: list[int]
    alignment: np.ndarray         # [num_orbits, orbit_size] variable indices


@dataclass
class LinkedOrbitBlocks:
    blocks: list[OrbitBlock]


@dataclass
class SymmetryDetection:
    """Bundle of everything downstream consumers need."""

    generators: SymmetryGenerators
    orbits: OrbitPartition
    blocks: LinkedOrbitBlocks
    detect_seconds: float = 0.0


def _check_perm(p, n, name):
    p = np.asarray(p, dtype=np.int64)
    if p.shape != (n,) or np.any(np.sort(p) != np.arange(n)):
        raise ValueError(f"{name} is not a permutation of length {n}")
    return p


def verify_symmetry(inst, var_perm, cons_perm) -> bool:
    """Exact check of the symmetry conditions (no tolerance).

    Bounds equality is required as well: the instance keeps variable bounds
    outside A, so a permutation moving a variable onto one with different
    bounds would not preserve the feasible set.
    """
    n, m = inst.num_vars, inst.num_cons
    pi = _check_perm(var_perm, n, "var_perm")
    sigma = _check_perm(cons_perm, m, "cons_perm")
    if not np.array_equal(inst.obj[pi], inst.obj):
        return False
    if not np.array_equal(inst.var_lower[pi], inst.var_lower):
        return False
    if not np.array_equal(inst.var_upper[pi], inst.var_upper):
        return False
    if not np.array_equal(inst.rhs[sigma], inst.rhs):
        return False
    coeff = {}
    for r, j, v in zip(inst.rows, inst.cols, inst.vals):
        coeff[(int(r), int(j))] = float(v)
    for (r, j), v in coeff.items():
        if coeff.get((int(sigma[r]), int(pi[j]))) != v:
            return False
    return True


class _ColoredGraph:
    """Vertex-colored weighted graph: variables first, then constraints."""

    def __init__(self, inst):
        n, m = inst.num_vars, inst.num_cons
        self.n, self.m = n, m
        self.size = n + m
        keys = [
            (0, float(inst.obj[j]), int(inst.var_lower[j]), int(inst.var_upper[j]))
            for j in range(n)
        ]
        keys += [(1, float(inst.rhs[i]), 0, 0) for i in range(m)]
        self.color_keys = keys
        self.adj: list[list[tuple[int, float]]] = [[] for _ in range(self.size)]
        self.edge_weight = {}
        for r, j, v in zip(inst.rows, inst.cols, inst.vals):
            u, w, val = int(j), n + int(r), float(v)
            self.adj[u].append((w, val))
            self.adj[w].append((u, val))
            self.edge_weight[(u, w)] = val
        for lst in self.adj:
            lst.sort()

    def initial_cells(self):
        order = sorted(range(self.size), key=lambda u: (self.color_keys[u], u))
        cells, current, prev = [], [], None
        for u in order:
            if self.color_keys[u] != prev:
                if current:
                    cells.append(current)
                current, prev = [], self.color_keys[u]
            current.append(u)
        if current:
            cells.append(current)
        return cells

    def is_automorphism(self, g) -> bool:
        for u in range(self.size):
            if self.color_keys[g[u]] != self.color_keys[u]:
                return False
        for (u, w), val in self.edge_weight.items():
            if self.edge_weight.get((int(g[u]), int(g[w]))) != val:
                return False
        return True


def _refine(cg: _ColoredGraph, cells):
    """Coarsest stable refinement; splits are isomorphism-invariant."""
    while True:
        cell_of = [0] * cg.size
        for idx, cell in enumerate(cells):
            for u in cell:
                cell_of[u] = idx
        changed = False
        new_cells = []
        for cell in cells:
            if len(cell) == 1:
                new_cells.append(cell)
                continue
            buckets: dict[tuple, list[int]] = {}
            for u in cell:
                sig = tuple(sorted((cell_of[v], w) for v, w in cg.adj[u]))
                buckets.setdefault(sig, []).append(u)
            if len(buckets) == 1:
                new_cells.append(cell)
            else:
                changed = True
                for sig in sorted(buckets):
                    new_cells.append(buckets[sig])
        if not changed:
            return cells
        cells = new_cells


class _BudgetHit(Exception):
    pass


class _Search:
    """Individualization-refinement search for graph automorphisms."""

    def __init__(self, cg: _ColoredGraph, node_budget: int):
        self.cg = cg
        self.budget = node_budget
        self.nodes = 0
        self.first_leaf: list[int] | None = None
        self.gens: list[tuple] = []

    def run(self):
        partial = False
        try:
            self._dfs(self.cg.initial_cells(), (), True)
        except _BudgetHit:
            partial = True
        return self.gens, partial

    def _stab_orbit_find(self, prefix):
        """Union-find over nodes for generators fixing `prefix` pointwise."""
        parent = list(range(self.cg.size))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for g in self.gens:
            if all(g[p] == p for p in prefix):
                for k in range(self.cg.size):
                    ra, rb = find(k), find(g[k])
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        return find

    def _dfs(self, cells, prefix, on_first_path):
        self.nodes += 1
        if self.nodes > self.budget:
            raise _BudgetHit
        cells = _refine(self.cg, cells)
        if all(len(c) == 1 for c in cells):
            labeling = [c[0] for c in cells]
            if self.first_leaf is None:
                self.first_leaf = labeling
                return None
            g = [0] * self.cg.size
            for a, b in zip(self.first_leaf, labeling):
                g[a] = b
            g = tuple(g)
            return g if self.cg.is_automorphism(g) else None
        target = next(i for i, c in enumerate(cells) if len(c) > 1)
        cell = cells[target]

        def child(v):
            rest = [u for u in cell if u != v]
            return cells[:target] + [[v], rest] + cells[target + 1 :]

        if on_first_path:
            processed = []
            for idx, v in enumerate(cell):
                if idx > 0:
                    find = self._stab_orbit_find(prefix)
                    if any(find(v) == find(u) for u in processed):
                        processed.append(v)
                        continue
                got = self._dfs(child(v), prefix + (v,), idx == 0)
                if got is not None:
                    self.gens.append(got)
                processed.append(v)
            return None
        for v in cell:
            got = self._dfs(child(v), prefix + (v,), False)
            if got is not None:
                return got  # backjump: one automorphism per sibling suffices
        return None


def detect_symmetry(inst, node_budget: int = 1_000_000):
    """Find generators of the formulation symmetry group and variable orbits.

    Returns (SymmetryGenerators, OrbitPartition).  Every emitted generator is
    re-verified against the instance; a failure is an InvariantError.
    """
    n, m = inst.num_vars, inst.num_cons
    cg = _ColoredGraph(inst)
    joint, partial = _Search(cg, node_budget).run()

    pairs = []
    for g in joint:
        pi = np.array(g[:n], dtype=np.int64)
        sigma = np.array([g[n + i] - n for i in range(m)], dtype=np.int64)
        if not verify_symmetry(inst, pi, sigma):
            raise InvariantError("detected generator failed exact verification")
        pairs.append((pi, sigma))

    pi_list = [pi for pi, _ in pairs]
    order = permgroup.group_order(pi_list, n)
    gens = SymmetryGenerators(pairs, math.log10(order), partial=partial)

    orbits = permgroup.orbits_of(pi_list, n)
    orbit_of = np.empty(n, dtype=np.int64)
    for k, orb in enumerate(orbits):
        for j in orb:
            orbit_of[j] = k
    return gens, OrbitPartition(orbit_of, orbits)


def analyze_instance(inst, node_budget: int = 1_000_000) -> SymmetryDetection:
    """Full symmetry workup: generators, orbits, linked blocks, wall time."""
    start = time.perf_counter()
    gens, orbits = detect_symmetry(inst, node_budget)
    blocks = linked_blocks(gens, orbits)
    return SymmetryDetection(gens, orbits, blocks, time.perf_counter() - start)


def orbits_brute_force(inst, n_cap: int = 8, m_cap: int = 6) -> OrbitPartition:
    """Reference orbits by enumerating all (pi, sigma) pairs.

    Guarded to tiny sizes; intended as a test oracle only.
    """
    n, m = inst.num_vars, inst.num_cons
    if n > n_cap or m > m_cap:
        raise ValueError("instance too large for brute force")
    sym_pis = []
    for pi in itertools.permutations(range(n)):
        pi_arr = np.array(pi, dtype=np.int64)
        if not np.array_equal(inst.obj[pi_arr], inst.obj):
            continue
        if not np.array_equal(inst.var_lower[pi_arr], inst.var_lower):
            continue
        if not np.array_equal(inst.var_upper[pi_arr], inst.var_upper):
            continue
        for sigma in itertools.permutations(range(m)):
            if verify_symmetry(inst, pi_arr, np.array(sigma, dtype=np.int64)):
                sym_pis.append(pi_arr)
                break
    orbits = permgroup.orbits_of(sym_pis, n)
    orbit_of = np.empty(n, dtype=np.int64)
    for k, orb in enumerate(orbits):
        for j in orb:
            orbit_of[j] = k
    return OrbitPartition(orbit_of, orbits)


def _equivariant_bijection(orb_a, orb_b, pi_list):
    """Bijection phi: orb_a -> orb_b commuting with every generator, or None."""
    if len(orb_a) != len(orb_b):
        return None
    x0 = orb_a[0]
    for y0 in orb_b:
        phi = {x0: y0}
        queue = [x0]
        ok = True
        while queue and ok:
            x = queue.pop()
            y = phi[x]
            for p in pi_list:
                x2, y2 = int(p[x]), int(p[y])
                if x2 in phi:
                    if phi[x2] != y2:
                        ok = False
                        break
                else:
                    phi[x2] = y2
                    queue.append(x2)
        if ok and len(phi) == len(orb_a) and len(set(phi.values())) == len(phi):
            return phi
    return None


def linked_blocks(generators: SymmetryGenerators, orbits: OrbitPartition) -> LinkedOrbitBlocks:
    """Group nontrivial orbits that move in lockstep under the whole group.

    Two orbits are linked when an equivariant bijection exists between them;
    that is an equivalence relation, so the blocks are its classes.  Each
    block's alignment matrix has one row per orbit; column k of every row is
    the image of column k of the representative row under the linking
    bijection, so every group element permutes columns consistently across
    rows.  Trivial orbits are left out entirely.
    """
    pi_list = [pi for pi, _ in generators.generators]
    ids = orbits.nontrivial()
    parent = {k: k for k in ids}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for a, b in itertools.combinations(ids, 2):
        if find(a) == find(b):
            continue
        if _equivariant_bijection(orbits.orbits[a], orbits.orbits[b], pi_list) is not None:
            ra, rb = find(a), find(b)
            parent[max(ra, rb)] = min(ra, rb)

    classes: dict[int, list[int]] = {}
    for k in ids:
        classes.setdefault(find(k), []).append(k)

    blocks = []
    for root in sorted(classes, key=lambda r: min(orbits.orbits[r])):
        members = sorted(classes[root], key=lambda k: min(orbits.orbits[k]))
        rep = orbits.orbits[members[0]]
        columns = sorted(rep)
        rows = [columns]
        for k in members[1:]:
            phi = _equivariant_bijection(rep, orbits.orbits[k], pi_list)
            if phi is None:
                raise InvariantError("linked orbits lost their bijection")
            rows.append([phi[x] for x in columns])
        alignment = np.array(rows, dtype=np.int64)
        _assert_block_consistency(alignment, pi_list)
        blocks.append(OrbitBlock(members, alignment))
    return LinkedOrbitBlocks(blocks)


def _assert_block_consistency(alignment, pi_list):
    """Every generator must act on each block as one column permutation."""
    p_rows, c = alignment.shape
    col_of = [{int(v): j for j, v in enumerate(row)} for row in alignment]
    for p in pi_list:
        taus = []
        for i in range(p_rows):
            tau = [col_of[i].get(int(p[alignment[i, j]])) for j in range(c)]
            if None in tau:
                raise InvariantError("generator moves a block row out of itself")
            taus.append(tau)
        if any(t != taus[0] for t in taus[1:]):
            raise InvariantError("generator acts inconsistently across block rows")
