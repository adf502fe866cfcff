"""Network statistics: degree/value series, spectral quantities, clustering.

All distribution-style outputs are unnormalized complementary cumulative
series ``D(x) = #{observations >= x}`` over the distinct observed values,
which is what the distance metrics consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .graphs import degree_counts

#: Statistic keys in canonical report order: in-degree, out-degree,
#: singular values, leading-singular-vector components, clustering
#: coefficient by degree, triad participation.
STAT_NAMES = ("ind", "outd", "sval", "svec", "ccf", "tp")


@dataclass
class CcdfSeries:
    """Positive x grid with per-point series values.

    For ccdf-produced series the values are observation counts and are
    non-increasing by construction; the clustering-by-degree series reuses
    the container with mean coefficients as values.
    """

    xs: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if self.xs.ndim != 1 or self.xs.shape != self.counts.shape:
            raise ValueError("xs and counts must be 1-D and of equal length")
        if self.xs.size == 0:
            raise ValueError("series must be non-empty")
        if (self.xs <= 0).any():
            raise ValueError("x values must be positive")
        if (np.diff(self.xs) <= 0).any():
            raise ValueError("x values must be strictly increasing")
        if not np.isfinite(self.counts).all() or (self.counts <= 0).any():
            raise ValueError("series values must be positive and finite")

    def __len__(self):
        return self.xs.size


def ccdf(values):
    """Unnormalized complementary cumulative series of positive observations.

    Zeros are dropped (the series lives on a log scale); an input with no
    positive values is an error.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size and (v < 0).any():
        raise ValueError("observations must be non-negative")
    v = v[v > 0]
    if v.size == 0:
        raise ValueError("no positive observations; empty series")
    xs, first_counts = np.unique(v, return_counts=True)
    remaining = v.size - np.concatenate(([0], np.cumsum(first_counts[:-1])))
    return CcdfSeries(xs=xs, counts=remaining.astype(np.float64))


def degree_ccdf(graph, direction):
    """CCDF of the nonzero in- or out-degrees."""
    return ccdf(degree_counts(graph, direction))


# ---------------------------------------------------------------------------
# Spectral statistics
# ---------------------------------------------------------------------------


def _matvec_pair(graph):
    src = graph.edge_array[:, 0]
    dst = graph.edge_array[:, 1]
    n = graph.n_nodes

    def matvec(x):
        y = np.zeros(n, dtype=np.float64)
        if src.size:
            np.add.at(y, src, x[dst])
        return y

    def rmatvec(x):
        y = np.zeros(n, dtype=np.float64)
        if src.size:
            np.add.at(y, dst, x[src])
        return y

    return matvec, rmatvec


def _orth_unit(x, basis, rng, n):
    """Orthonormalize x against basis columns; random restart on breakdown.

    Returns (vector, True) or (None, False) when the space is exhausted.
    """
    for attempt in range(40):
        y = x if attempt == 0 else rng.standard_normal(n)
        for _ in range(2):
            if basis.shape[1]:
                y = y - basis @ (basis.T @ y)
        norm = np.linalg.norm(y)
        if norm > 1e-10:
            return y / norm, True
        if basis.shape[1] >= n:
            return None, False
    return None, False


def _top_triplets(graph, k, tol=1e-6, max_steps=None, seed=7):
    """Top-k singular triplets via iterative bidiagonalization.

    Grows paired Krylov bases with full reorthogonalization (random
    restarts deflate captured invariant subspaces), projects the operator
    onto the bases, and stops once the explicitly computed triplet
    residuals fall below ``tol * sigma_max``.
    """
    n = graph.n_nodes
    if k == 0 or n == 0:
        z = np.zeros((n, 0))
        return np.zeros(0), z, z
    matvec, rmatvec = _matvec_pair(graph)
    cap = n if max_steps is None else min(max_steps, n)
    rng = np.random.default_rng(seed)

    U = np.zeros((n, 0))
    V = np.zeros((n, 0))
    AV = np.zeros((n, 0))
    v_next = rng.standard_normal(n)
    last_residual = np.inf
    for step in range(cap):
        v, ok = _orth_unit(v_next, V, rng, n)
        if not ok:
            break
        V = np.column_stack([V, v])
        av = matvec(v)
        AV = np.column_stack([AV, av])
        u, ok = _orth_unit(av, U, rng, n)
        if not ok:
            break
        U = np.column_stack([U, u])
        v_next = rmatvec(u)

        m = V.shape[1]
        if m < k and m < n:
            continue
        proj = U.T @ AV
        left, sigmas, right_t = np.linalg.svd(proj)
        top = min(k, m)
        scale = max(sigmas[0], 1e-12) if sigmas.size else 1e-12
        worst = 0.0
        for t in range(top):
            u_hat = U @ left[:, t]
            v_hat = V @ right_t[t]
            r1 = np.linalg.norm(AV @ right_t[t] - sigmas[t] * u_hat)
            r2 = np.linalg.norm(rmatvec(u_hat) - sigmas[t] * v_hat)
            worst = max(worst, r1, r2)
        last_residual = worst
        if worst <= tol * scale and m >= min(k, n):
            out = np.zeros(k)
            out[:top] = sigmas[:top]
            u_cols = np.zeros((n, k))
            v_cols = np.zeros((n, k))
            u_cols[:, :top] = U @ left[:, :top]
            v_cols[:, :top] = (V @ right_t.T)[:, :top]
            return out, u_cols, v_cols
    raise ConvergenceError(
        f"singular triplets did not converge within {cap} steps",
        residual=last_residual,
    )


def singular_values(graph, k, tol=1e-6, max_steps=None):
    """Top-k singular values of the adjacency matrix, descending."""
    if k < 0 or k > graph.n_nodes:
        raise ValueError("k must satisfy 0 <= k <= n_nodes")
    sigmas, _, _ = _top_triplets(graph, k, tol=tol, max_steps=max_steps)
    return sigmas


def leading_singular_vector(graph, tol=1e-6, max_steps=None):
    """Component magnitudes of the left singular vector of the top value.

    Errors when the top value is degenerate (gap <= 1e-8), where the
    vector is not identified.
    """
    k = min(2, graph.n_nodes)
    sigmas, u_cols, _ = _top_triplets(graph, k, tol=tol, max_steps=max_steps)
    if sigmas.size == 0:
        raise ValueError("graph has no nodes")
    gap = sigmas[0] - sigmas[1] if sigmas.size > 1 else sigmas[0]
    if gap <= 1e-8:
        raise ValueError(
            f"top singular value is degenerate (gap {gap:.3e}); "
            "leading vector undefined"
        )
    vec = np.abs(u_cols[:, 0])
    return vec / np.linalg.norm(vec)


# ---------------------------------------------------------------------------
# Triangle statistics (undirected simplification)
# ---------------------------------------------------------------------------


def _undirected_neighbors(graph):
    nbrs = [set() for _ in range(graph.n_nodes)]
    for src, dst in graph.edge_array:
        nbrs[src].add(int(dst))
        nbrs[dst].add(int(src))
    return nbrs


def node_triangles(graph):
    """Per-node triangle counts, treating edges as undirected."""
    nbrs = _undirected_neighbors(graph)
    counts = np.zeros(graph.n_nodes, dtype=np.int64)
    for v in range(graph.n_nodes):
        mine = nbrs[v]
        total = sum(len(mine & nbrs[u]) for u in mine)
        counts[v] = total // 2
    return counts


def clustering_by_degree(graph):
    """(degree, mean local clustering coefficient) pairs for degrees >= 2."""
    nbrs = _undirected_neighbors(graph)
    triangles = node_triangles(graph)
    by_degree = {}
    for v in range(graph.n_nodes):
        d = len(nbrs[v])
        if d < 2:
            continue
        ccf = triangles[v] / (d * (d - 1) / 2)
        by_degree.setdefault(d, []).append(ccf)
    return [(d, float(np.mean(vals))) for d, vals in sorted(by_degree.items())]


def triad_participation(graph):
    """(t, number of nodes in exactly t triangles) pairs for t >= 1."""
    triangles = node_triangles(graph)
    positive = triangles[triangles >= 1]
    ts, counts = np.unique(positive, return_counts=True)
    return [(int(t), int(c)) for t, c in zip(ts, counts)]


# ---------------------------------------------------------------------------
# Statistic bundle for evaluation
# ---------------------------------------------------------------------------


def all_statistics(graph, k_singular=50):
    """The six evaluation series keyed by ``STAT_NAMES``.

    Singular values and vector components are turned into CCDFs (zeros and
    sub-1e-12 noise magnitudes dropped); clustering is a degree-indexed
    series of positive mean coefficients; triad participation becomes the
    CCDF of per-node triangle counts. A statistic with no positive
    observations raises a ValueError naming it.
    """
    if graph.n_edges == 0:
        raise ValueError("graph has no edges; statistics undefined")
    stats = {}

    def build(name, fn):
        try:
            stats[name] = fn()
        except ValueError as exc:
            raise ValueError(f"statistic '{name}' is empty: {exc}") from exc

    build("ind", lambda: degree_ccdf(graph, "in"))
    build("outd", lambda: degree_ccdf(graph, "out"))
    k = min(k_singular, graph.n_nodes)
    build("sval", lambda: ccdf(singular_values(graph, k)))

    def svec_series():
        vec = leading_singular_vector(graph)
        return ccdf(vec[vec > 1e-12])

    build("svec", svec_series)

    def ccf_series():
        pairs = [(d, c) for d, c in clustering_by_degree(graph) if c > 0]
        if not pairs:
            raise ValueError("no positive clustering coefficients")
        return CcdfSeries(
            xs=np.array([d for d, _ in pairs], dtype=np.float64),
            counts=np.array([c for _, c in pairs], dtype=np.float64),
        )

    build("ccf", ccf_series)
    build("tp", lambda: ccdf(node_triangles(graph)))
    return stats
