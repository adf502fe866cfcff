"""Multiplicative attribute graph model.

A node carries L binary attributes. Attribute l has a prior
``P(F_il = 1) = mu_l`` and a 2x2 affinity matrix ``thetas[l]``. An ordered
pair (i, j), i != j, links independently with probability

    p_ij = prod_l thetas[l][F_il, F_jl]

The Bernoulli convention is fixed package-wide: ``mu`` is the probability
of attribute value 1, and posteriors in :mod:`mag.fit` use the same
orientation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .graphs import BinaryAttributeMatrix, DirectedGraph

#: Affinity entries must stay at least this far inside (0, 1).
AFFINITY_MARGIN = 1e-9

#: Dense probabilistic adjacency matrices are refused above this node count.
DEFAULT_DENSE_CAP = 5000


@dataclass
class MagParams:
    """Model parameters: attribute priors and affinity matrices.

    mu : (L,) array of priors, each strictly inside (0, 1).
    thetas : (L, 2, 2) stack of affinity matrices, entries strictly
        inside (0, 1) with margin ``AFFINITY_MARGIN``.
    """

    mu: np.ndarray
    thetas: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.thetas = np.asarray(self.thetas, dtype=np.float64)
        if self.mu.ndim != 1 or self.mu.size < 1:
            raise ValueError("mu must be a non-empty 1-D array")
        if self.thetas.shape != (self.mu.size, 2, 2):
            raise ValueError("thetas must have shape (L, 2, 2)")
        if not np.isfinite(self.mu).all() or not np.isfinite(self.thetas).all():
            raise ValueError("parameters must be finite")
        if (self.mu <= 0).any() or (self.mu >= 1).any():
            raise ValueError("mu entries must lie strictly inside (0, 1)")
        lo, hi = AFFINITY_MARGIN, 1.0 - AFFINITY_MARGIN
        if (self.thetas < lo).any() or (self.thetas > hi).any():
            raise ValueError(
                f"affinity entries must lie inside [{lo:g}, {hi:g}]"
            )

    @property
    def n_attrs(self):
        return self.mu.size


@dataclass
class ProbAdjacency:
    """Dense matrix of pairwise link probabilities; diagonal undefined (NaN)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        n = self.values.shape[0]
        if self.values.shape != (n, n):
            raise ValueError("values must be square")
        off = ~np.eye(n, dtype=bool)
        entries = self.values[off]
        if entries.size and ((entries <= 0).any() or (entries >= 1).any()):
            raise ValueError("off-diagonal entries must lie inside (0, 1)")
        np.fill_diagonal(self.values, np.nan)

    @property
    def n_nodes(self):
        return self.values.shape[0]


def edge_probability(f_i, f_j, thetas):
    """Link probability for one ordered pair of attribute vectors."""
    f_i = np.asarray(f_i, dtype=np.int64)
    f_j = np.asarray(f_j, dtype=np.int64)
    thetas = np.asarray(thetas, dtype=np.float64)
    if f_i.shape != f_j.shape or f_i.ndim != 1:
        raise ValueError("attribute vectors must be 1-D and of equal length")
    if thetas.shape != (f_i.size, 2, 2):
        raise ValueError("thetas must have shape (L, 2, 2) matching the vectors")
    sel = thetas[np.arange(f_i.size), f_i, f_j]
    return float(np.prod(sel))


def sample_attributes(params, n, seed):
    """Sample an n x L binary attribute matrix from the priors."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    bits = (rng.random((n, params.n_attrs)) < params.mu[None, :]).astype(np.int8)
    return BinaryAttributeMatrix(bits=bits)


def _edge_prob_row(bits, thetas, i):
    """Vector of p_ij over all j for fixed source i (diagonal included)."""
    p = np.ones(bits.shape[0], dtype=np.float64)
    for l in range(thetas.shape[0]):
        p *= thetas[l][bits[i, l], bits[:, l]]
    return p


def prob_adjacency(attrs, thetas, max_nodes=DEFAULT_DENSE_CAP):
    """Dense probabilistic adjacency for a concrete attribute matrix.

    Desk scale only: refuses to build matrices larger than `max_nodes`.
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    bits = attrs.bits
    n = bits.shape[0]
    if n > max_nodes:
        raise ValueError(f"dense adjacency refused for n_nodes={n} > cap {max_nodes}")
    if thetas.shape != (bits.shape[1], 2, 2):
        raise ValueError("thetas shape does not match attribute count")
    p = np.ones((n, n), dtype=np.float64)
    for l in range(thetas.shape[0]):
        p *= thetas[l][bits[:, l][:, None], bits[:, l][None, :]]
    return ProbAdjacency(values=p)


def sample_graph(attrs, thetas, seed):
    """Sample a directed graph: each ordered pair (i, j), i != j, appears
    independently with probability p_ij.

    Each row draws from its own seed-derived substream, so the outcome of
    pair (i, j) depends only on (seed, i, j), not on iteration order.
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    bits = attrs.bits
    n = bits.shape[0]
    if thetas.shape != (bits.shape[1], 2, 2):
        raise ValueError("thetas shape does not match attribute count")
    row_seeds = np.random.SeedSequence(seed).spawn(n)
    edges = []
    for i in range(n):
        rng = np.random.default_rng(row_seeds[i])
        u = rng.random(n)
        p = _edge_prob_row(bits, thetas, i)
        hits = np.flatnonzero(u < p)
        for j in hits:
            if j != i:
                edges.append((i, int(j)))
    return DirectedGraph(n, edges)


def _graph_term_row(graph, bits, thetas, i):
    """Row i contribution to the graph log-likelihood."""
    p = _edge_prob_row(bits, thetas, i)
    log_p = np.log(p)
    log_q = np.log1p(-p)
    total = log_q.sum() - log_q[i]  # all j != i as non-edges
    out = graph.out_adjacency[i]
    if out.size:
        total += (log_p[out] - log_q[out]).sum()
    return total


def graph_log_likelihood_given_attrs(graph, attrs, thetas):
    """log P(A | F, Theta): edge and non-edge terms over ordered pairs."""
    thetas = np.asarray(thetas, dtype=np.float64)
    if graph.n_nodes != attrs.n_nodes:
        raise ValueError("graph and attribute matrix disagree on node count")
    if thetas.shape != (attrs.n_attrs, 2, 2):
        raise ValueError("thetas shape does not match attribute count")
    return float(
        sum(
            _graph_term_row(graph, attrs.bits, thetas, i)
            for i in range(graph.n_nodes)
        )
    )


def attribute_log_likelihood(attrs, mu):
    """log P(F | mu) under the Bernoulli priors."""
    mu = np.asarray(mu, dtype=np.float64)
    bits = attrs.bits
    return float((bits * np.log(mu) + (1 - bits) * np.log1p(-mu)).sum())


def joint_log_likelihood(graph, attrs, params):
    """log P(A, F | mu, Theta) = graph term + attribute prior term."""
    return graph_log_likelihood_given_attrs(
        graph, attrs, params.thetas
    ) + attribute_log_likelihood(attrs, params.mu)


# ---------------------------------------------------------------------------
# Parameter file format
# ---------------------------------------------------------------------------

_MAGIC = "MAGPARAMS 1"


def format_params(params):
    """Serialize parameters to the line-oriented MAGPARAMS text format."""
    lines = [_MAGIC, f"L {params.n_attrs}"]
    lines.append("mu " + " ".join(repr(float(v)) for v in params.mu))
    for l in range(params.n_attrs):
        t = params.thetas[l]
        vals = " ".join(repr(float(v)) for v in (t[0, 0], t[0, 1], t[1, 0], t[1, 1]))
        lines.append(f"theta {l} {vals}")
    return "\n".join(lines) + "\n"


def parse_params(text):
    """Parse the MAGPARAMS text format; inverse of :func:`format_params`."""
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != _MAGIC:
        raise ParseError(f"expected header {_MAGIC!r}", line=1)
    if len(lines) < 3 or not lines[1].startswith("L "):
        raise ParseError("expected 'L <count>' on line 2", line=2)
    try:
        n_attrs = int(lines[1].split()[1])
    except (IndexError, ValueError):
        raise ParseError("bad attribute count", line=2)
    if n_attrs < 1:
        raise ParseError("attribute count must be >= 1", line=2)
    if not lines[2].startswith("mu "):
        raise ParseError("expected 'mu ...' on line 3", line=3)
    try:
        mu = np.array([float(v) for v in lines[2].split()[1:]], dtype=np.float64)
    except ValueError:
        raise ParseError("bad mu value", line=3)
    if mu.size != n_attrs:
        raise ParseError(f"expected {n_attrs} mu values, got {mu.size}", line=3)

    if len(lines) != 3 + n_attrs:
        raise ParseError(f"expected {n_attrs} theta lines")
    thetas = np.empty((n_attrs, 2, 2), dtype=np.float64)
    seen = set()
    for offset, line in enumerate(lines[3:], start=4):
        tokens = line.split()
        if len(tokens) != 6 or tokens[0] != "theta":
            raise ParseError("expected 'theta <l> <4 entries>'", line=offset)
        try:
            l = int(tokens[1])
            vals = [float(v) for v in tokens[2:]]
        except ValueError:
            raise ParseError("bad theta entry", line=offset)
        if not 0 <= l < n_attrs or l in seen:
            raise ParseError(f"bad or repeated theta index {l}", line=offset)
        seen.add(l)
        thetas[l] = np.array(vals, dtype=np.float64).reshape(2, 2)

    try:
        return MagParams(mu=mu, thetas=thetas)
    except ValueError as exc:
        raise ParseError(str(exc))


def write_params(params, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_params(params))


def read_params(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_params(fh.read())
