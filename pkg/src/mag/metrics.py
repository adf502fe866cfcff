"""Distribution distances on log scales and probabilistic-adjacency scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netstats import STAT_NAMES


def _window(d1, d2):
    a = max(d1.xs[0], d2.xs[0])
    b = min(d1.xs[-1], d2.xs[-1])
    if a > b:
        raise ValueError(
            f"series supports do not intersect ([{d1.xs[0]:g}, {d1.xs[-1]:g}] "
            f"vs [{d2.xs[0]:g}, {d2.xs[-1]:g}])"
        )
    return a, b


def _union_grid(d1, d2, a, b):
    xs = np.union1d(d1.xs, d2.xs)
    return xs[(xs >= a) & (xs <= b)]


def _step_values(series, grid):
    """Right-continuous step evaluation: hold each value until the next x."""
    idx = np.searchsorted(series.xs, grid, side="right") - 1
    return series.counts[idx]


def ks_log(d1, d2):
    """Max absolute log-difference of the two step series over the shared
    support, evaluated on the union of their grids."""
    a, b = _window(d1, d2)
    grid = _union_grid(d1, d2, a, b)
    diff = np.log(_step_values(d1, grid)) - np.log(_step_values(d2, grid))
    return float(np.abs(diff).max())


def l2_log(d1, d2):
    """Root mean-square log-difference in log-x measure over the shared
    support, by exact piecewise integration of the squared step difference."""
    a, b = _window(d1, d2)
    if a >= b:
        raise ValueError(
            f"degenerate shared support [{a:g}, {b:g}]; need an interval"
        )
    grid = _union_grid(d1, d2, a, b)
    diff = np.log(_step_values(d1, grid)) - np.log(_step_values(d2, grid))
    log_grid = np.log(grid)
    segments = np.diff(log_grid)
    integral = float((diff[:-1] ** 2 * segments).sum())
    return float(np.sqrt(integral / (log_grid[-1] - log_grid[0])))


def prob_log_likelihood(graph, prob):
    """Bernoulli log-likelihood of the graph under a probabilistic adjacency."""
    p = prob.values
    n = graph.n_nodes
    if p.shape[0] != n:
        raise ValueError("graph and probability matrix disagree on node count")
    off = ~np.eye(n, dtype=bool)
    total = float(np.log1p(-p[off]).sum())
    src = graph.edge_array[:, 0]
    dst = graph.edge_array[:, 1]
    if src.size:
        on_edges = p[src, dst]
        total += float((np.log(on_edges) - np.log1p(-on_edges)).sum())
    return total


def tpi(graph, prob):
    """Edge probability mass relative to a uniform random graph of the
    same density: ``sum_edges P_ij / (E^2 / N^2)``."""
    e = graph.n_edges
    if e == 0:
        raise ValueError("TPI undefined for an edgeless graph")
    if prob.n_nodes != graph.n_nodes:
        raise ValueError("graph and probability matrix disagree on node count")
    src = graph.edge_array[:, 0]
    dst = graph.edge_array[:, 1]
    mass = float(prob.values[src, dst].sum())
    return mass / (e**2 / graph.n_nodes**2)


@dataclass
class DistanceReport:
    """Per-statistic KS and L2 distances plus their averages."""

    ks: dict
    l2: dict

    def __post_init__(self):
        for table in (self.ks, self.l2):
            for name, value in table.items():
                if not np.isfinite(value) or value < 0:
                    raise ValueError(f"distance for '{name}' must be finite and >= 0")

    @property
    def avg_ks(self):
        return float(np.mean([self.ks[name] for name in self.ks]))

    @property
    def avg_l2(self):
        return float(np.mean([self.l2[name] for name in self.l2]))

    def rows(self):
        """(statistic, ks, l2) rows in canonical order plus the avg row."""
        out = [(name, self.ks[name], self.l2[name]) for name in self.ks]
        out.append(("avg", self.avg_ks, self.avg_l2))
        return out


def distance_report(real_stats, model_stats, names=STAT_NAMES):
    """Compare two statistic bundles (dicts of series) statistic by statistic."""
    ks = {}
    l2 = {}
    for name in names:
        ks[name] = ks_log(real_stats[name], model_stats[name])
        l2[name] = l2_log(real_stats[name], model_stats[name])
    return DistanceReport(ks=ks, l2=l2)
