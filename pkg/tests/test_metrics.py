"""Distribution distances and probabilistic-adjacency scores."""

import math

import numpy as np
import pytest

from mag.graphs import DirectedGraph
from mag.metrics import (
    DistanceReport,
    distance_report,
    ks_log,
    l2_log,
    prob_log_likelihood,
    tpi,
)
from mag.model import ProbAdjacency
from mag.netstats import CcdfSeries, ccdf
from util import uniform_random_graph


def series(xs, counts):
    return CcdfSeries(xs=np.array(xs, float), counts=np.array(counts, float))


class TestKsLog:
    def test_identical_series_zero(self):
        s = series([1, 2, 4], [5, 3, 1])
        assert ks_log(s, s) == 0.0

    def test_constant_factor_is_log_factor(self):
        s1 = series([1, 2, 4], [8, 4, 2])
        s2 = series([1, 2, 4], [16, 8, 4])
        assert ks_log(s1, s2) == pytest.approx(math.log(2), abs=1e-12)

    def test_hand_evaluated_two_point_grid(self):
        d1 = series([1, 2], [4, 1])
        d2 = series([1, 2], [4, 2])
        assert ks_log(d1, d2) == pytest.approx(math.log(2), abs=1e-12)

    def test_union_grid_uses_step_holds(self):
        d1 = series([1, 4], [10, 1])
        d2 = series([2, 8], [10, 1])
        # shared window [2, 4]; at x=2: D1 holds 10 (from x=1), D2 = 10;
        # at x=4: D1 = 1, D2 holds 10
        assert ks_log(d1, d2) == pytest.approx(math.log(10), abs=1e-12)

    def test_disjoint_supports_error(self):
        with pytest.raises(ValueError, match="do not intersect"):
            ks_log(series([1, 2], [2, 1]), series([5, 6], [2, 1]))

    def test_symmetry(self):
        rng = np.random.default_rng(263)
        s1 = ccdf(rng.integers(1, 30, 50))
        s2 = ccdf(rng.integers(1, 30, 60))
        assert ks_log(s1, s2) == pytest.approx(ks_log(s2, s1), rel=1e-12)


class TestL2Log:
    def test_identical_series_zero(self):
        s = series([1, 3, 9], [6, 4, 1])
        assert l2_log(s, s) == 0.0

    def test_constant_factor_is_log_factor(self):
        s1 = series([1, 2, 4], [8, 4, 2])
        s2 = series([1, 2, 4], [24, 12, 6])
        assert l2_log(s1, s2) == pytest.approx(math.log(3), rel=1e-12)

    def test_hand_piecewise_integration(self):
        # log-differences 0 and log 2 on two unit log-segments
        e = math.e
        d1 = series([1, e, e * e], [4, 4, 4])
        d2 = series([1, e, e * e], [4, 2, 2])
        expected = math.sqrt((0.0 + math.log(2) ** 2) / 2.0)
        assert l2_log(d1, d2) == pytest.approx(expected, rel=1e-12)

    def test_single_shared_point_error(self):
        with pytest.raises(ValueError, match="degenerate"):
            l2_log(series([1, 2], [2, 1]), series([2, 3], [2, 1]))

    def test_l2_never_exceeds_ks(self):
        rng = np.random.default_rng(269)
        for _ in range(20):
            s1 = ccdf(rng.integers(1, 40, 80))
            s2 = ccdf(rng.integers(1, 40, 70))
            assert l2_log(s1, s2) <= ks_log(s1, s2) + 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(271)
        s1 = ccdf(rng.integers(1, 25, 40))
        s2 = ccdf(rng.integers(1, 25, 50))
        assert l2_log(s1, s2) == pytest.approx(l2_log(s2, s1), rel=1e-12)


def uniform_prob(n, p):
    return ProbAdjacency(values=np.full((n, n), float(p)))


class TestProbLogLikelihood:
    def test_constant_half(self):
        g = DirectedGraph(2, [(0, 1)])
        assert prob_log_likelihood(g, uniform_prob(2, 0.5)) == pytest.approx(
            2 * math.log(0.5), abs=1e-12
        )

    def test_direct_evaluation(self):
        g = DirectedGraph(2, [])
        assert prob_log_likelihood(g, uniform_prob(2, 0.25)) == pytest.approx(
            2 * math.log(0.75), abs=1e-12
        )

    def test_matches_naive_pair_loop(self):
        rng = np.random.default_rng(277)
        g = uniform_random_graph(4, 5, seed=281)
        p = ProbAdjacency(values=rng.uniform(0.05, 0.95, (4, 4)))
        naive = 0.0
        for i in range(4):
            for j in range(4):
                if i == j:
                    continue
                pij = p.values[i, j]
                naive += math.log(pij) if g.has_edge(i, j) else math.log(1 - pij)
        assert prob_log_likelihood(g, p) == pytest.approx(naive, abs=1e-12)

    def test_maximized_at_density_among_constants(self):
        g = uniform_random_graph(8, 14, seed=283)
        density = g.n_edges / (8 * 7)
        best = prob_log_likelihood(g, uniform_prob(8, density))
        for c in np.linspace(0.05, 0.95, 19):
            assert prob_log_likelihood(g, uniform_prob(8, c)) <= best + 1e-9


class TestTpi:
    def test_uniform_density_gives_one(self):
        g = uniform_random_graph(6, 9, seed=293)
        p = uniform_prob(6, g.n_edges / 36)
        assert tpi(g, p) == pytest.approx(1.0, rel=1e-12)

    def test_all_mass_on_edges_limit(self):
        g = uniform_random_graph(6, 9, seed=307)
        p = ProbAdjacency(values=np.full((6, 6), 1 - 1e-12))
        assert tpi(g, p) == pytest.approx(36 / g.n_edges, rel=1e-9)

    def test_hand_arithmetic(self):
        g = DirectedGraph(3, [(0, 1), (1, 2)])
        values = np.full((3, 3), 0.1)
        values[0, 1] = 0.5
        values[1, 2] = 0.25
        assert tpi(g, ProbAdjacency(values=values)) == pytest.approx(
            0.75 / (4 / 9), rel=1e-12
        )

    def test_edgeless_graph_error(self):
        with pytest.raises(ValueError, match="TPI undefined"):
            tpi(DirectedGraph(3, []), uniform_prob(3, 0.5))

    def test_scales_linearly_in_edge_mass(self):
        g = uniform_random_graph(7, 12, seed=311)
        rng = np.random.default_rng(313)
        values = rng.uniform(0.1, 0.4, (7, 7))
        base = tpi(g, ProbAdjacency(values=values.copy()))
        scaled = values.copy()
        src, dst = g.edge_array[:, 0], g.edge_array[:, 1]
        scaled[src, dst] *= 2.0
        assert tpi(g, ProbAdjacency(values=scaled)) == pytest.approx(
            2 * base, rel=1e-12
        )

    def test_invariant_under_relabeling(self):
        g = DirectedGraph(4, [(0, 1), (2, 3), (1, 3)])
        rng = np.random.default_rng(317)
        values = rng.uniform(0.1, 0.9, (4, 4))
        perm = np.array([2, 0, 3, 1])
        relabeled = DirectedGraph(
            4, [(int(perm[a]), int(perm[b])) for a, b in g.edge_array]
        )
        moved = np.empty_like(values)
        moved[np.ix_(perm, perm)] = values  # moved[perm(i), perm(j)] = values[i, j]
        assert tpi(relabeled, ProbAdjacency(values=moved)) == pytest.approx(
            tpi(g, ProbAdjacency(values=values.copy())), rel=1e-12
        )


class TestDistanceReport:
    def test_rows_and_averages(self):
        s1 = series([1, 2], [4, 2])
        s2 = series([1, 2], [8, 4])
        report = distance_report({"a": s1, "b": s1}, {"a": s2, "b": s1}, names=("a", "b"))
        assert report.ks["a"] == pytest.approx(math.log(2))
        assert report.ks["b"] == 0.0
        assert report.avg_ks == pytest.approx(math.log(2) / 2)
        rows = report.rows()
        assert rows[-1][0] == "avg"

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            DistanceReport(ks={"a": float("nan")}, l2={"a": 0.0})
