"""Network statistics: CCDFs, spectral quantities, triangles."""

import math

import numpy as np
import pytest

from mag.errors import ConvergenceError
from mag.graphs import DirectedGraph
from mag.netstats import (
    STAT_NAMES,
    all_statistics,
    ccdf,
    clustering_by_degree,
    degree_ccdf,
    leading_singular_vector,
    node_triangles,
    singular_values,
    triad_participation,
)
from util import dense_svd, uniform_random_graph


def star(n_leaves):
    return DirectedGraph(n_leaves + 1, [(0, i + 1) for i in range(n_leaves)])


def cycle(n):
    return DirectedGraph(n, [(i, (i + 1) % n) for i in range(n)])


def undirected_triangle():
    return DirectedGraph(3, [(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)])


def k4():
    return DirectedGraph(4, [(i, j) for i in range(4) for j in range(4) if i != j])


class TestCcdf:
    def test_direct_count(self):
        s = ccdf([1, 2, 3])
        assert s.xs.tolist() == [1, 2, 3]
        assert s.counts.tolist() == [3, 2, 1]

    def test_ties(self):
        s = ccdf([2, 2, 2])
        assert s.xs.tolist() == [2]
        assert s.counts.tolist() == [3]

    def test_zero_dropped(self):
        s = ccdf([0, 1])
        assert s.xs.tolist() == [1]
        assert s.counts.tolist() == [1]

    def test_all_zero_is_error(self):
        with pytest.raises(ValueError, match="empty series"):
            ccdf([0, 0])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ccdf([-1, 2])

    def test_counts_non_increasing_and_total_at_min(self):
        rng = np.random.default_rng(199)
        values = rng.integers(0, 20, 200)
        s = ccdf(values)
        assert (np.diff(s.counts) < 0).all()
        assert s.counts[0] == (values > 0).sum()


class TestDegreeCcdf:
    def test_star_out_direction(self):
        s = degree_ccdf(star(3), "out")
        assert s.xs.tolist() == [3]
        assert s.counts.tolist() == [1]

    def test_star_in_direction(self):
        s = degree_ccdf(star(3), "in")
        assert s.xs.tolist() == [1]
        assert s.counts.tolist() == [3]

    def test_cycle(self):
        for direction in ("in", "out"):
            s = degree_ccdf(cycle(3), direction)
            assert s.xs.tolist() == [1]
            assert s.counts.tolist() == [3]

    def test_edgeless_graph_is_error(self):
        with pytest.raises(ValueError):
            degree_ccdf(DirectedGraph(4, []), "out")


class TestSingularValues:
    def test_cycle_is_orthogonal(self):
        values = singular_values(cycle(8), 8)
        assert np.allclose(values, 1.0, atol=1e-8)

    def test_star_rank_one(self):
        values = singular_values(star(5), 6)
        assert values[0] == pytest.approx(math.sqrt(5), abs=1e-8)
        assert np.allclose(values[1:], 0.0, atol=1e-8)

    def test_random_matches_dense_oracle(self):
        g = uniform_random_graph(12, 30, seed=211)
        mine = singular_values(g, 12)
        _, oracle, _ = dense_svd(g)
        assert np.allclose(mine, oracle, atol=1e-6)

    def test_partial_k_matches_dense_oracle(self):
        g = uniform_random_graph(15, 40, seed=223)
        mine = singular_values(g, 4)
        _, oracle, _ = dense_svd(g)
        assert np.allclose(mine, oracle[:4], atol=1e-6)

    def test_non_increasing_and_frobenius_bound(self):
        g = uniform_random_graph(20, 60, seed=227)
        values = singular_values(g, 20)
        assert (np.diff(values) <= 1e-10).all()
        assert (values**2).sum() <= g.n_edges + 1e-6

    def test_k_above_n_rejected(self):
        with pytest.raises(ValueError):
            singular_values(cycle(3), 4)

    def test_iteration_cap_raises_with_residual(self):
        g = uniform_random_graph(30, 100, seed=229)
        with pytest.raises(ConvergenceError) as info:
            singular_values(g, 8, max_steps=2)
        assert info.value.residual is not None


class TestLeadingSingularVector:
    def test_star_concentrates_on_hub(self):
        vec = leading_singular_vector(star(5))
        assert vec[0] == pytest.approx(1.0, abs=1e-6)
        assert np.allclose(vec[1:], 0.0, atol=1e-6)

    def test_two_disjoint_stars_pick_larger_hub(self):
        edges = [(0, i) for i in range(1, 7)]  # 6-leaf star at node 0
        edges += [(7, i) for i in range(8, 11)]  # 3-leaf star at node 7
        g = DirectedGraph(11, edges)
        vec = leading_singular_vector(g)
        assert vec[0] == pytest.approx(1.0, abs=1e-6)
        assert vec[7] == pytest.approx(0.0, abs=1e-6)

    def test_random_matches_dense_oracle_up_to_sign(self):
        g = uniform_random_graph(12, 40, seed=233)
        vec = leading_singular_vector(g)
        u, s, _ = dense_svd(g)
        assert s[0] - s[1] > 1e-8
        assert np.allclose(vec, np.abs(u[:, 0]), atol=1e-6)

    def test_degenerate_top_value_is_error(self):
        with pytest.raises(ValueError, match="degenerate"):
            leading_singular_vector(cycle(6))


class TestTriangles:
    def test_triangle_counts(self):
        assert node_triangles(undirected_triangle()).tolist() == [1, 1, 1]

    def test_one_directed_edge_per_pair_still_counts(self):
        g = DirectedGraph(3, [(0, 1), (1, 2), (0, 2)])
        assert node_triangles(g).tolist() == [1, 1, 1]

    def test_clustering_triangle(self):
        assert clustering_by_degree(undirected_triangle()) == [(2, 1.0)]

    def test_clustering_path(self):
        g = DirectedGraph(3, [(0, 1), (1, 2)])
        assert clustering_by_degree(g) == [(2, 0.0)]

    def test_clustering_k4(self):
        assert clustering_by_degree(k4()) == [(3, 1.0)]

    def test_triads_triangle(self):
        assert triad_participation(undirected_triangle()) == [(1, 3)]

    def test_triads_k4(self):
        assert triad_participation(k4()) == [(3, 4)]

    def test_triads_path_empty(self):
        g = DirectedGraph(3, [(0, 1), (1, 2)])
        assert triad_participation(g) == []

    def test_histogram_mass_is_three_triangles(self):
        g = uniform_random_graph(30, 180, seed=239)
        hist = triad_participation(g)
        per_node = node_triangles(g)
        # total triangle count by brute force over node triples
        nbrs = [set(g.out_adjacency[v]) | set(g.in_adjacency[v]) for v in range(30)]
        total = sum(
            1
            for a in range(30)
            for b in range(a + 1, 30)
            for c in range(b + 1, 30)
            if b in nbrs[a] and c in nbrs[a] and c in nbrs[b]
        )
        assert sum(t * c for t, c in hist) == 3 * total
        assert per_node.sum() == 3 * total

    def test_clustering_values_within_unit_interval(self):
        g = uniform_random_graph(25, 120, seed=241)
        for _, value in clustering_by_degree(g):
            assert 0.0 <= value <= 1.0


class TestAllStatistics:
    def test_bundle_keys_and_types(self):
        g = uniform_random_graph(40, 400, seed=251)
        stats = all_statistics(g, k_singular=10)
        assert set(stats) == set(STAT_NAMES)
        for series in stats.values():
            assert len(series) >= 1

    def test_triangle_free_graph_names_missing_statistic(self):
        with pytest.raises(ValueError, match="statistic '(ccf|tp)'"):
            all_statistics(star(4), k_singular=2)

    def test_edgeless_graph_rejected(self):
        with pytest.raises(ValueError, match="no edges"):
            all_statistics(DirectedGraph(3, []))
