"""Permutation utilities and a deterministic Schreier-Sims group order.

Permutations are arrays/tuples p of length N with p[k] the image of k.
compose(p, q)[k] = p[q[k]], so applying q first and then p equals applying
compose(p, q); this matches the vector action y -> y[p] used elsewhere.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def identity(n: int) -> tuple:
    return tuple(range(n))


def compose(p, q) -> tuple:
    """compose(p, q)[k] = p[q[k]] (apply q, then p)."""
    return tuple(p[k] for k in q)


def invert(p) -> tuple:
    out = [0] * len(p)
    for k, v in enumerate(p):
        out[v] = k
    return tuple(out)


def is_identity(p) -> bool:
    return all(k == v for k, v in enumerate(p))


class _Level:
    __slots__ = ("point", "gens", "orbit")

    def __init__(self, point):
        self.point = point
        self.gens = []      # strong generators fixing all base points above
        self.orbit = {}     # point -> transversal element mapping base point there


def _rebuild_orbit(level):
    b = level.point
    trans = {b: None}  # None stands for the identity transversal element
    queue = deque([b])
    while queue:
        p = queue.popleft()
        for g in level.gens:
            q = g[p]
            if q not in trans:
                tp = trans[p]
                trans[q] = g if tp is None else compose(g, tp)
                queue.append(q)
    level.orbit = trans


def _trans_perm(level, p, n):
    t = level.orbit[p]
    return identity(n) if t is None else t


class StabilizerChain:
    """Base and strong generating set built with deterministic Schreier-Sims."""

    def __init__(self, generators, degree: int):
        self.degree = int(degree)
        self.levels: list[_Level] = []
        gens = []
        seen = set()
        for g in generators:
            t = tuple(int(v) for v in g)
            if len(t) != self.degree:
                raise ValueError("generator has wrong degree")
            if sorted(t) != list(range(self.degree)):
                raise ValueError("generator is not a permutation")
            if not is_identity(t) and t not in seen:
                seen.add(t)
                gens.append(t)
        for g in gens:
            self._add_generator(g)

    def _strip(self, g, start=0):
        for i in range(start, len(self.levels)):
            lev = self.levels[i]
            p = g[lev.point]
            if p not in lev.orbit:
                return g, i
            g = compose(invert(_trans_perm(lev, p, self.degree)), g)
        return g, len(self.levels)

    def _add_generator(self, g):
        residue, lvl = self._strip(g)
        if is_identity(residue):
            return
        if lvl == len(self.levels):
            point = next(k for k in range(self.degree) if residue[k] != k)
            self.levels.append(_Level(point))
        # The residue fixes every base point above lvl, so it is a valid
        # strong generator for all levels up to and including lvl.
        for i in range(lvl + 1):
            self.levels[i].gens.append(residue)
        for i in range(lvl, -1, -1):
            self._close(i)

    def _close(self, i):
        """Re-establish the Schreier-Sims invariant at level i."""
        lev = self.levels[i]
        _rebuild_orbit(lev)
        changed = True
        while changed:
            changed = False
            for p in sorted(lev.orbit):
                tp = _trans_perm(lev, p, self.degree)
                for g in list(lev.gens):
                    q = g[p]
                    tq = _trans_perm(lev, q, self.degree)
                    schreier = compose(invert(tq), compose(g, tp))
                    if is_identity(schreier):
                        continue
                    residue, lvl = self._strip(schreier, i + 1)
                    if is_identity(residue):
                        continue
                    if lvl == len(self.levels):
                        point = next(k for k in range(self.degree) if residue[k] != k)
                        self.levels.append(_Level(point))
                    for j in range(i + 1, lvl + 1):
                        self.levels[j].gens.append(residue)
                    for j in range(lvl, i, -1):
                        self._close(j)
                    changed = True
            if changed:
                _rebuild_orbit(lev)

    def order(self) -> int:
        n = 1
        for lev in self.levels:
            n *= len(lev.orbit)
        return n


def group_order(generators, degree: int) -> int:
    """Order of the permutation group generated by `generators`."""
    return StabilizerChain(generators, degree).order()


def enumerate_group(generators, degree: int, cap: int = 100000) -> list[tuple]:
    """All elements of the generated group by BFS; None if more than cap."""
    gens = [tuple(int(v) for v in g) for g in generators]
    start = identity(degree)
    seen = {start}
    queue = deque([start])
    while queue:
        g = queue.popleft()
        for h in gens:
            f = compose(h, g)
            if f not in seen:
                if len(seen) >= cap:
                    return None
                seen.add(f)
                queue.append(f)
    return sorted(seen)


def orbits_of(generators, degree: int) -> list[list[int]]:
    """Orbit partition of {0..degree-1} under the generated group.

    Orbits are sorted internally and listed by smallest member.
    """
    parent = list(range(degree))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for g in generators:
        for k in range(degree):
            ra, rb = find(k), find(int(g[k]))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for k in range(degree):
        groups.setdefault(find(k), []).append(k)
    return [sorted(v) for _, v in sorted(groups.items())]
