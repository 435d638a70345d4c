import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knnrecovery.core_graph import (
    EdgeId,
    KnnGraph,
    Permutation,
    adjacent_swap_graph,
    canonical_key,
    cycle_distance,
    difference_graph,
    edge_distance,
    edge_index,
    edge_pair,
    edge_pairs,
    hamming_distance,
    is_nearby,
    knn_from_permutation,
    neighbor_intersection_formula,
    neighbor_intersection_size,
    num_pairs,
)
from knnrecovery.enumeration import canonical_orders


def one_based(edges):
    return {(a + 1, b + 1) for a, b in edges}


@st.composite
def cycles(draw, max_n=14):
    k = draw(st.integers(1, 4))
    n = draw(st.integers(2 * k + 2, max(2 * k + 2, max_n)))
    order = draw(st.permutations(range(n)))
    return Permutation(tuple(order)), k


def test_edge_index_is_a_bijection():
    n = 40
    seen = {}
    for j in range(n):
        for i in range(j):
            idx = edge_index(i, j)
            assert edge_index(j, i) == idx
            assert edge_pair(idx) == (i, j)
            seen[idx] = (i, j)
    assert sorted(seen) == list(range(num_pairs(n)))
    a, b = edge_pairs(np.arange(num_pairs(n)))
    assert list(zip(a.tolist(), b.tolist())) == [seen[i] for i in range(num_pairs(n))]


def test_edge_pairs_large_indices():
    idx = np.array([num_pairs(10**4) - 1, 123456789, 0])
    a, b = edge_pairs(idx)
    assert np.array_equal(a * 0 + b * (b - 1) // 2 + a, idx)
    assert np.all(a < b)


def test_permutation_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation((0, 1, 1))
    with pytest.raises(ValueError):
        Permutation((1, 2, 3))


def test_identity_n8_k2_incident_edges():
    x = knn_from_permutation(Permutation.identity(8), 2)
    assert x.num_edges == 16
    incident = {e for e in one_based(x.edge_list()) if 1 in e}
    assert incident == {(1, 2), (1, 3), (1, 8), (1, 7)}


def test_k1_is_the_hamiltonian_cycle():
    x = knn_from_permutation(Permutation.identity(6), 1)
    assert one_based(x.edge_list()) == {(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (1, 6)}


def test_reversal_gives_same_graph():
    sigma = Permutation.identity(10)
    assert knn_from_permutation(sigma, 3) == knn_from_permutation(sigma.reversed(), 3)


def test_rejects_degenerate_sizes():
    with pytest.raises(ValueError):
        knn_from_permutation(Permutation.identity(5), 2)
    with pytest.raises(ValueError):
        knn_from_permutation(Permutation.identity(6), 0)


def test_knn_graph_validates_regularity():
    x = knn_from_permutation(Permutation.identity(8), 2)
    bad = x.edges.copy()
    bad[0] = edge_index(0, 4)
    with pytest.raises(ValueError):
        KnnGraph(8, 2, bad)


@given(cycles())
def test_knn_graph_is_2k_regular(case):
    sigma, k = case
    x = knn_from_permutation(sigma, k)
    assert x.num_edges == k * sigma.n
    assert all(len(nb) == 2 * k for nb in x.neighbors)


@given(cycles(), st.integers(0, 20))
def test_dihedral_invariance(case, shift):
    sigma, k = case
    x = knn_from_permutation(sigma, k)
    assert canonical_key(knn_from_permutation(sigma.shifted(shift), k)) == canonical_key(x)
    assert canonical_key(knn_from_permutation(sigma.reversed(), k)) == canonical_key(x)


def test_cycle_distance_examples():
    x = knn_from_permutation(Permutation.identity(8), 2)
    assert cycle_distance(x, 0, 7) == 1
    assert cycle_distance(x, 0, 4) == 4


def test_cycle_distance_is_a_metric_exhaustively():
    for n in range(4, 13):
        sigma = Permutation.random(n, np.random.default_rng(n))
        x = knn_from_permutation(sigma, 1)
        d = [[cycle_distance(x, i, j) if i != j else 0 for j in range(n)] for i in range(n)]
        for i, j in itertools.product(range(n), repeat=2):
            assert d[i][j] == d[j][i]
            assert (d[i][j] == 0) == (i == j)
        for i, j, l in itertools.product(range(n), repeat=3):
            assert d[i][l] <= d[i][j] + d[j][l]


def test_cycle_distance_needs_generator():
    x = knn_from_permutation(Permutation.identity(8), 2)
    bare = KnnGraph(8, 2, x.edges)
    with pytest.raises(ValueError):
        cycle_distance(bare, 0, 1)


def test_edge_distance_examples():
    x = knn_from_permutation(Permutation.identity(12), 2)
    e = EdgeId(0, 1)
    assert edge_distance(x, e, e) == 0
    assert edge_distance(x, (0, 2), (0, 1)) == 0
    # 1-based (1,2) and (7,8): closest endpoints 2 and 7
    assert edge_distance(x, (0, 1), (6, 7)) == 5
    assert not is_nearby(x, (0, 1), (6, 7))
    assert is_nearby(x, (0, 1), (4, 5))
    with pytest.raises(ValueError):
        edge_distance(x, (0, 6), (0, 1))


def test_difference_graph_of_self_is_empty():
    x = knn_from_permutation(Permutation.identity(9), 2)
    g = difference_graph(x, x)
    assert g.delta == 0 and g.is_balanced()


def test_difference_graph_rejects_mismatch():
    with pytest.raises(ValueError):
        difference_graph(knn_from_permutation(Permutation.identity(9), 2),
                         knn_from_permutation(Permutation.identity(9), 1))


@pytest.mark.parametrize("k", [2, 3])
def test_adjacent_swap_difference_graph(k):
    n, i = 14, 6
    x_star = knn_from_permutation(Permutation.identity(n), k)
    g = difference_graph(adjacent_swap_graph(x_star, i), x_star)
    assert set(g.red_edges()) == {EdgeId.of(i - k, i), EdgeId.of(i + 1, i + k + 1)}
    assert set(g.blue_edges()) == {EdgeId.of(i - k, i + 1), EdgeId.of(i, i + k + 1)}
    assert g.delta == 2
    assert g.is_balanced()
    assert g.red_degree().max() == 1 and g.blue_degree().max() == 1


def test_adjacent_swap_k1_has_four_edges():
    x_star = knn_from_permutation(Permutation.identity(8), 1)
    g = difference_graph(adjacent_swap_graph(x_star, 3), x_star)
    assert g.delta == 2 and g.blue.size == 2
    assert hamming_distance(adjacent_swap_graph(x_star, 3), x_star) == 4


def test_adjacent_swap_wraps_and_is_an_involution():
    x_star = knn_from_permutation(Permutation.identity(10), 2)
    once = adjacent_swap_graph(x_star, 9)
    assert hamming_distance(once, x_star) == 4
    assert adjacent_swap_graph(once, 9) == x_star


def test_difference_graph_against_per_edge_comparison():
    x_star = knn_from_permutation(Permutation.identity(8), 2)
    # 1-based cycle (1,4,3,5,6,8,7,2)
    x = knn_from_permutation(Permutation((0, 3, 2, 4, 5, 7, 6, 1)), 2)
    g = difference_graph(x, x_star)
    red, blue = set(), set()
    for j in range(8):
        for i in range(j):
            in_star, in_x = EdgeId(i, j) in x_star, EdgeId(i, j) in x
            if in_star and not in_x:
                red.add(EdgeId(i, j))
            if in_x and not in_star:
                blue.add(EdgeId(i, j))
    assert set(g.red_edges()) == red and set(g.blue_edges()) == blue
    assert g.delta == len(red) and g.is_balanced()
    assert hamming_distance(x, x_star) == 2 * g.delta


def test_hamming_matches_difference_graph_on_all_pairs_n8():
    rng = np.random.default_rng(7)
    graphs = [knn_from_permutation(Permutation.random(8, rng), 2) for _ in range(40)]
    for a, b in itertools.combinations(graphs, 2):
        g = difference_graph(a, b)
        assert hamming_distance(a, b) == 2 * g.delta
        assert g.is_balanced()
    assert hamming_distance(graphs[0], graphs[0]) == 0


@settings(max_examples=60)
@given(cycles(max_n=12), st.permutations(range(12)))
def test_difference_graph_invariants(case, other):
    sigma, k = case
    n = sigma.n
    x_star = knn_from_permutation(sigma, k)
    x = knn_from_permutation(Permutation(tuple(v for v in other if v < n)), k)
    g = difference_graph(x, x_star)
    assert np.intersect1d(g.red, g.blue).size == 0
    assert g.is_balanced()
    assert hamming_distance(x, x_star) == 2 * g.delta


def test_neighbor_intersection_formula_values():
    assert neighbor_intersection_formula(1, 2) == 2
    assert neighbor_intersection_formula(4, 2) == 1
    assert neighbor_intersection_formula(5, 2) == 0


@pytest.mark.parametrize("n,k", [(n, k) for k in range(1, 5) for n in range(4 * k + 1, 13)])
def test_neighbor_intersection_exhaustive(n, k):
    sigma = Permutation.random(n, np.random.default_rng(100 * n + k))
    x = knn_from_permutation(sigma, k)
    for j, j2 in itertools.permutations(range(n), 2):
        direct = len(x.neighbors[j] & x.neighbors[j2])
        assert neighbor_intersection_size(x, j, j2) == direct
        assert direct == neighbor_intersection_formula(cycle_distance(x, j, j2), k)


def test_neighbor_intersection_formula_breaks_on_short_cycles():
    # n=11, k=3: at distance 5 the neighbourhoods also meet around the far side
    x = knn_from_permutation(Permutation.identity(11), 3)
    assert neighbor_intersection_size(x, 0, 5) == 3
    assert neighbor_intersection_formula(5, 3) == 2


def test_canonical_key_dedup_n6_k2():
    keys = {canonical_key(knn_from_permutation(Permutation(o), 2)) for o in canonical_orders(6)}
    assert sum(1 for _ in canonical_orders(6)) == 60
    assert len(keys) == 15
