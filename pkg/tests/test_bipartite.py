import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symilp.bipartite import BipartiteGraph, graphs_equal, permute, to_bipartite
from symilp.ilp import build_instance

from test_ilp import random_instance, tiny_symmetric


def conflict_pair():
    """Two equivalent instances related by swapping variables 1 and 3."""
    first = build_instance(
        3, [("=", 1.0, [(0, 1.0), (1, 1.0)])], obj=[1.0, 1.0, 3.0]
    )
    second = build_instance(
        3, [("=", 1.0, [(1, 1.0), (2, 1.0)])], obj=[3.0, 1.0, 1.0]
    )
    pi = np.array([2, 1, 0])
    sigma = np.array([0, 1])
    return first, second, pi, sigma


def test_encoding_mirrors_nonzeros():
    inst = tiny_symmetric()
    g = to_bipartite(inst)
    assert g.num_vars == 3 and g.num_cons == 2
    assert np.array_equal(g.var_feats, [0.0, 0.0, 1.0])
    assert np.array_equal(g.cons_feats, [1.0, -1.0])
    assert g.num_edges == 6
    assert np.array_equal(g.edge_vals, [1, 1, 1, -1, -1, -1])


def test_adjacency_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(20):
        inst = random_instance(rng)
        g = to_bipartite(inst)
        rebuilt = set()
        for j in range(g.num_vars):
            for i, w in g.var_neighbors(j):
                rebuilt.add((i, j, w))
        direct = set(zip(g.edge_cons.tolist(), g.edge_vars.tolist(), g.edge_vals.tolist()))
        assert rebuilt == direct
        rebuilt2 = set()
        for i in range(g.num_cons):
            for j, w in g.cons_neighbors(i):
                rebuilt2.add((i, j, w))
        assert rebuilt2 == direct


def test_identity_permutation_is_noop():
    g = to_bipartite(tiny_symmetric())
    h = permute(g, np.arange(3), np.arange(2))
    assert graphs_equal(g, h)


def test_permuted_features_follow_convention():
    inst = build_instance(
        3,
        [("<=", 4.0, [(0, 1.0)]), ("<=", 5.0, [(1, 2.0), (2, 3.0)])],
        obj=[10.0, 20.0, 30.0],
    )
    g = to_bipartite(inst)
    pi = np.array([1, 2, 0])
    sigma = np.array([1, 0])
    h = permute(g, pi, sigma)
    # value at position k comes from old position pi[k]
    assert np.array_equal(h.var_feats, [20.0, 30.0, 10.0])
    assert np.array_equal(h.cons_feats, [5.0, 4.0])
    # old edge (cons 1, var 2, w 3) must appear at (sigma^-1 1, pi^-1 2) = (0, 1)
    found = dict(h.cons_neighbors(0))
    assert found[1] == 3.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 2**31 - 1))
def test_permutation_composition_is_group_action(seed_a, seed_b):
    rng = np.random.default_rng(12345)
    inst = random_instance(rng, n_max=5, m_max=4)
    g = to_bipartite(inst)
    n, m = g.num_vars, g.num_cons
    ra, rb = np.random.default_rng(seed_a), np.random.default_rng(seed_b)
    p1, s1 = ra.permutation(n), ra.permutation(m)
    p2, s2 = rb.permutation(n), rb.permutation(m)
    stepwise = permute(permute(g, p1, s1), p2, s2)
    combined = permute(g, p1[p2], s1[s2])
    assert graphs_equal(stepwise, combined)


def test_permute_round_trip_with_inverse():
    rng = np.random.default_rng(4)
    for _ in range(20):
        inst = random_instance(rng)
        g = to_bipartite(inst)
        n, m = g.num_vars, g.num_cons
        pi, sigma = rng.permutation(n), rng.permutation(m)
        inv_pi = np.argsort(pi)
        inv_sigma = np.argsort(sigma)
        assert graphs_equal(permute(permute(g, pi, sigma), inv_pi, inv_sigma), g)


def test_equivalent_pair_related_by_permutation():
    first, second, pi, sigma = conflict_pair()
    ga, gb = to_bipartite(first), to_bipartite(second)
    assert graphs_equal(permute(ga, pi, sigma), gb)


def test_rejects_non_permutation():
    g = to_bipartite(tiny_symmetric())
    with pytest.raises(ValueError):
        permute(g, np.array([0, 0, 1]), np.arange(2))


def test_rejects_unsorted_edges():
    with pytest.raises(ValueError):
        BipartiteGraph(
            var_feats=np.zeros(2),
            cons_feats=np.zeros(1),
            edge_cons=np.array([0, 0]),
            edge_vars=np.array([1, 0]),
            edge_vals=np.array([1.0, 1.0]),
        )
