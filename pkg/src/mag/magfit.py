"""Variational EM fitting of the multiplicative attribute graph model.

Latent binary attributes get a fully factorized mean-field posterior with
per-entry parameters ``phi[i, l] = Q(F_il = 1)`` (same orientation as the
``mu`` priors). Fitting alternates a stochastic-gradient update of ``phi``
(E-step, optionally regularized by pairwise mutual information between
attribute columns) with a closed-form ``mu`` update plus gradient ascent
on the affinity matrices (M-step).

Three evaluation modes are supported for the pairwise terms of the lower
bound and its gradients:

``exact``
    Non-edge terms ``E[log(1 - prod_l Theta_l[F_il, F_jl])]`` computed by
    enumeration over attribute assignments. Desk scale only.
``taylor``
    Non-edge terms replaced by the quadratic approximation
    ``log(1 - x) ~ -x - x^2/2``, summed pair by pair in O(N^2) work. This
    is the naive reference path.
``fast``
    The taylor approximation combined with an empty-graph decomposition:
    the all-pairs sum is replaced by ``N(N-1)`` times its expectation
    under the attribute priors, corrected per existing edge. O(E) work.

``exact`` and ``taylor`` are synonyms for the affinity gradient, whose
non-edge part is defined through the quadratic approximation.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericalError
from .graphs import BinaryAttributeMatrix
from .model import DEFAULT_DENSE_CAP, MagParams, ProbAdjacency

#: Posterior, prior, and affinity values are clamped to [CLAMP, 1 - CLAMP]
#: during optimization (gradients divide by affinity entries, and the
#: quadratic approximation needs pair probabilities below 1).
CLAMP = 1e-6

MODES = ("exact", "taylor", "fast")


class OpCounters:
    """Counts of pairwise-term evaluations, for asymptotic-cost assertions.

    `pair_terms` counts per-pair (or per-neighbor) log-likelihood or
    gradient term evaluations; `generic_terms` counts evaluations of the
    empty-graph expectation used by the fast path.
    """

    def __init__(self):
        self.reset()

    def reset(self):
        self.pair_terms = 0
        self.generic_terms = 0


counters = OpCounters()


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


@dataclass
class VariationalPosterior:
    """Mean-field posterior over the attribute matrix.

    phi : (N, L) array with entries in [CLAMP, 1 - CLAMP];
        ``phi[i, l] = Q(F_il = 1)``.
    fixed : (L,) bool array; fixed columns hold observed attributes
        pinned at the clamp bounds and are never updated.
    """

    phi: np.ndarray
    fixed: np.ndarray = field(default=None)
    eps: float = CLAMP

    def __post_init__(self):
        self.phi = np.array(self.phi, dtype=np.float64)
        if self.phi.ndim != 2:
            raise ValueError("phi must be 2-D")
        if self.fixed is None:
            self.fixed = np.zeros(self.phi.shape[1], dtype=bool)
        self.fixed = np.asarray(self.fixed, dtype=bool)
        if self.fixed.shape != (self.phi.shape[1],):
            raise ValueError("fixed must be a per-column flag vector")
        lo, hi = self.eps, 1.0 - self.eps
        if (self.phi < lo - 1e-15).any() or (self.phi > hi + 1e-15).any():
            raise ValueError(f"phi entries must lie in [{lo:g}, {hi:g}]")
        for l in np.flatnonzero(self.fixed):
            col = self.phi[:, l]
            if not np.all((col == lo) | (col == hi)):
                raise ValueError(f"fixed column {l} must hold exactly {lo} or {hi}")

    @property
    def n_nodes(self):
        return self.phi.shape[0]

    @property
    def n_attrs(self):
        return self.phi.shape[1]

    def latent_columns(self):
        return np.flatnonzero(~self.fixed)

    def copy(self):
        return VariationalPosterior(
            phi=self.phi.copy(), fixed=self.fixed.copy(), eps=self.eps
        )

    @classmethod
    def from_bits(cls, bits, eps=CLAMP):
        """Pinned posterior representing an observed attribute matrix."""
        bits = np.asarray(bits)
        phi = np.where(bits == 1, 1.0 - eps, eps)
        return cls(phi=phi, fixed=np.ones(bits.shape[1], dtype=bool), eps=eps)


@dataclass
class FitConfig:
    """Hyperparameters of the variational EM fit.

    `batch_size=None` resolves to ``max(N * L // 10, 1)`` at run time.
    """

    n_attrs: int
    lambda_mi: float = 0.1
    batch_size: int = None
    estep_rate: float = 0.05
    mstep_rate: float = 0.01
    estep_iters: int = 10
    mstep_iters: int = 20
    em_rounds: int = 100
    tol: float = 1e-4
    mode: str = "fast"
    seed: int = 0
    eps: float = CLAMP

    def __post_init__(self):
        if self.n_attrs < 1:
            raise ValueError("n_attrs must be >= 1")
        if self.lambda_mi < 0:
            raise ValueError("lambda_mi must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.estep_rate < 0 or self.mstep_rate < 0:
            raise ValueError("step rates must be >= 0")
        for name in ("estep_iters", "mstep_iters", "em_rounds"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        _check_mode(self.mode)


@dataclass
class FitResult:
    params: MagParams
    posterior: VariationalPosterior
    lq_trace: np.ndarray
    converged: bool
    rounds_used: int

    def __post_init__(self):
        self.lq_trace = np.asarray(self.lq_trace, dtype=np.float64)
        if self.lq_trace.shape != (self.rounds_used,):
            raise ValueError("lq_trace length must equal rounds_used")


# ---------------------------------------------------------------------------
# Pairwise expectation helpers
# ---------------------------------------------------------------------------


def _pair_expect(pi, pj, m):
    """E[m[F_i, F_j]] for independent Bernoulli values with P(1)=pi, P(1)=pj.

    `pi` and `pj` broadcast; `m` is 2x2.
    """
    return (
        (1.0 - pi) * ((1.0 - pj) * m[0, 0] + pj * m[0, 1])
        + pi * ((1.0 - pj) * m[1, 0] + pj * m[1, 1])
    )


def _value_expect(v, pj, m):
    """E[m[v, F_j]] for a fixed row value v and Bernoulli column value."""
    return (1.0 - pj) * m[v, 0] + pj * m[v, 1]


def _edge_log_expect(phi, log_thetas, src, dst):
    """Vector of E[log p_ij] over edge arrays (src, dst)."""
    total = np.zeros(len(src), dtype=np.float64)
    for k in range(phi.shape[1]):
        total += _pair_expect(phi[src, k], phi[dst, k], log_thetas[k])
    return total


def _taylor_nonedge(phi, thetas, thetas_sq, src, dst):
    """Vector of quadratic-approximation non-edge terms over pair arrays."""
    prod1 = np.ones(len(src), dtype=np.float64)
    prod2 = np.ones(len(src), dtype=np.float64)
    for k in range(phi.shape[1]):
        prod1 *= _pair_expect(phi[src, k], phi[dst, k], thetas[k])
        prod2 *= _pair_expect(phi[src, k], phi[dst, k], thetas_sq[k])
    return -prod1 - 0.5 * prod2


def _assignment_tables(phi, cols):
    """Enumerate bit assignments over `cols` with per-node posterior weights.

    Returns (assignments, weights) where weights[r, i] = prod_k Q_ik(a_k)
    for the r-th assignment; pair probabilities are built by the callers.
    """
    n = phi.shape[0]
    assignments = list(itertools.product((0, 1), repeat=len(cols)))
    weights = np.ones((len(assignments), n), dtype=np.float64)
    for row, bits in enumerate(assignments):
        for k, b in zip(cols, bits):
            weights[row] *= phi[:, k] if b else 1.0 - phi[:, k]
    return assignments, weights


# ---------------------------------------------------------------------------
# Per-entry scores and the E-step gradient
# ---------------------------------------------------------------------------


def _direction_scores(graph, phi, thetas, mu, i, l, nbrs, mode):
    """Score both values of F_il for one direction of incidence.

    `thetas` must already be oriented so that node i selects rows and the
    opposite endpoint selects columns; `nbrs` are the opposite endpoints
    of the existing edges in this direction. Returns an array [s(0), s(1)].
    """
    n = graph.n_nodes
    n_attrs = phi.shape[1]
    log_thetas = np.log(thetas)
    thetas_sq = thetas**2
    others = [k for k in range(n_attrs) if k != l]
    scores = np.zeros(2, dtype=np.float64)

    if mode == "fast":
        counters.pair_terms += len(nbrs)
        counters.generic_terms += 1
        # Empty-graph expectation: opposite endpoint follows the priors.
        prod1 = 1.0
        prod2 = 1.0
        for k in others:
            prod1 *= _pair_expect(phi[i, k], mu[k], thetas[k])
            prod2 *= _pair_expect(phi[i, k], mu[k], thetas_sq[k])
        for v in (0, 1):
            gen = (
                -_value_expect(v, mu[l], thetas[l]) * prod1
                - 0.5 * _value_expect(v, mu[l], thetas_sq[l]) * prod2
            )
            scores[v] = (n - 1) * gen
        if len(nbrs):
            edge_base = np.zeros(len(nbrs), dtype=np.float64)
            pair1 = np.ones(len(nbrs), dtype=np.float64)
            pair2 = np.ones(len(nbrs), dtype=np.float64)
            for k in others:
                edge_base += _pair_expect(phi[i, k], phi[nbrs, k], log_thetas[k])
                pair1 *= _pair_expect(phi[i, k], phi[nbrs, k], thetas[k])
                pair2 *= _pair_expect(phi[i, k], phi[nbrs, k], thetas_sq[k])
            for v in (0, 1):
                edge = edge_base + _value_expect(v, phi[nbrs, l], log_thetas[l])
                tay = (
                    -_value_expect(v, phi[nbrs, l], thetas[l]) * pair1
                    - 0.5 * _value_expect(v, phi[nbrs, l], thetas_sq[l]) * pair2
                )
                scores[v] += (edge - tay).sum()
        return scores

    counters.pair_terms += n - 1
    js = np.arange(n)
    mask = js != i
    js = js[mask]
    edge_base = np.zeros(n, dtype=np.float64)
    for k in others:
        edge_base += _pair_expect(phi[i, k], phi[:, k], log_thetas[k])

    if mode == "taylor":
        pair1 = np.ones(n, dtype=np.float64)
        pair2 = np.ones(n, dtype=np.float64)
        for k in others:
            pair1 *= _pair_expect(phi[i, k], phi[:, k], thetas[k])
            pair2 *= _pair_expect(phi[i, k], phi[:, k], thetas_sq[k])
        for v in (0, 1):
            nonedge = (
                -_value_expect(v, phi[:, l], thetas[l]) * pair1
                - 0.5 * _value_expect(v, phi[:, l], thetas_sq[l]) * pair2
            )
            total = nonedge[js].sum()
            if len(nbrs):
                edge = edge_base[nbrs] + _value_expect(
                    v, phi[nbrs, l], log_thetas[l]
                )
                total += (edge - nonedge[nbrs]).sum()
            scores[v] = total
        return scores

    # Exact enumeration of the non-edge expectation. Assignments cover node
    # i's other attributes (rows) and all attributes of the opposite
    # endpoint (columns); the log(1 - prod) factor is shared across nodes.
    row_assign, row_w = _assignment_tables(phi, others)
    row_w = row_w[:, i]
    col_assign, col_w = _assignment_tables(phi, list(range(n_attrs)))
    nonedge = np.zeros((2, n), dtype=np.float64)
    for rw, ra in zip(row_w, row_assign):
        row_bits = dict(zip(others, ra))
        for cw, ca in zip(col_w, col_assign):
            prod = 1.0
            for k in others:
                prod *= thetas[k][row_bits[k], ca[k]]
            for v in (0, 1):
                p = prod * thetas[l][v, ca[l]]
                nonedge[v] += rw * cw * math.log1p(-p)
    for v in (0, 1):
        total = nonedge[v, js].sum()
        if len(nbrs):
            edge = edge_base[nbrs] + _value_expect(v, phi[nbrs, l], log_thetas[l])
            total += (edge - nonedge[v, nbrs]).sum()
        scores[v] = total
    return scores


def _attr_scores(graph, posterior, params, i, l, mode):
    """Both-value scores for entry (i, l): out direction, in direction
    (row/column roles swapped via transposed affinities), and the prior."""
    phi = posterior.phi
    out_scores = _direction_scores(
        graph, phi, params.thetas, params.mu, i, l, graph.out_adjacency[i], mode
    )
    thetas_t = np.transpose(params.thetas, (0, 2, 1))
    in_scores = _direction_scores(
        graph, phi, thetas_t, params.mu, i, l, graph.in_adjacency[i], mode
    )
    prior = np.array(
        [math.log1p(-params.mu[l]), math.log(params.mu[l])], dtype=np.float64
    )
    return out_scores + in_scores + prior


def attr_log_score(graph, posterior, params, i, l, value, mode="fast"):
    """Expected joint log-likelihood contribution of setting attribute l of
    node i to `value`, up to an additive constant shared by both values.

    Covers the incident-pair terms in both directions and the attribute's
    own prior term, with the non-edge treatment selected by `mode`.
    """
    _check_mode(mode)
    if value not in (0, 1):
        raise ValueError("value must be 0 or 1")
    return float(_attr_scores(graph, posterior, params, i, l, mode)[value])


def phi_gradient(graph, posterior, params, i, l, mode="fast"):
    """Gradient of the lower bound with respect to phi[i, l].

    Equals ``log(S(1) / phi) - log(S(0) / (1 - phi))`` where ``S(v)`` is
    the exponentiated value score; additive constants shared by the two
    scores cancel. Raises on fixed columns.
    """
    _check_mode(mode)
    if posterior.fixed[l]:
        raise ValueError(f"attribute column {l} is fixed; no gradient defined")
    scores = _attr_scores(graph, posterior, params, i, l, mode)
    p = posterior.phi[i, l]
    return float(scores[1] - scores[0] - math.log(p / (1.0 - p)))


# ---------------------------------------------------------------------------
# Mutual information between posterior attribute columns
# ---------------------------------------------------------------------------


def _mi_tables(phi):
    """Marginals (L, 2) and joints (L, L, 2, 2) of the posterior columns."""
    q = np.stack([1.0 - phi, phi], axis=2)  # (N, L, 2)
    marginals = q.mean(axis=0)
    joints = np.einsum("nlx,nmy->lmxy", q, q) / phi.shape[0]
    return marginals, joints


def mutual_information(posterior, l, l_other):
    """Mutual information between posterior columns l and l_other.

    Computed from the column-averaged joint ``(1/N) sum_i Q_il(x) Q_il'(y)``
    and its marginals; zero-probability cells contribute 0.
    """
    if l == l_other:
        raise ValueError("mutual information requires two distinct columns")
    marginals, joints = _mi_tables(posterior.phi)
    joint = joints[l, l_other]
    total = 0.0
    for x in (0, 1):
        for y in (0, 1):
            pxy = joint[x, y]
            if pxy > 0.0:
                total += pxy * math.log(
                    pxy / (marginals[l, x] * marginals[l_other, y])
                )
    # the sum is a KL divergence; floor out negative rounding noise
    return float(max(total, 0.0))


def _mi_gradient_from_tables(phi, marginals, joints, i, l):
    n_attrs = phi.shape[1]
    if n_attrs == 1:
        return 0.0
    n = phi.shape[0]
    total = 0.0
    log_marg = math.log(marginals[l, 1] / marginals[l, 0])
    for l2 in range(n_attrs):
        if l2 == l:
            continue
        q2 = (1.0 - phi[i, l2], phi[i, l2])
        for y in (0, 1):
            total += q2[y] * math.log(joints[l, l2, 1, y] / joints[l, l2, 0, y])
        total -= log_marg
    return total / n


def mutual_information_gradient(posterior, i, l):
    """Gradient of the summed pairwise mutual information w.r.t. phi[i, l]."""
    if posterior.fixed[l]:
        raise ValueError(f"attribute column {l} is fixed; no gradient defined")
    marginals, joints = _mi_tables(posterior.phi)
    return float(
        _mi_gradient_from_tables(posterior.phi, marginals, joints, i, l)
    )


# ---------------------------------------------------------------------------
# Lower bound
# ---------------------------------------------------------------------------


def _entropy(phi):
    return float(-(phi * np.log(phi) + (1.0 - phi) * np.log1p(-phi)).sum())


def _exact_nonedge_total(graph, phi, thetas):
    """Sum of exact non-edge expectations over all ordered pairs i != j.

    Enumerates joint attribute assignments; the per-pair weight factorizes
    into per-node products, so the all-pairs sum needs only node totals
    and an edge correction.
    """
    n_attrs = phi.shape[1]
    cols = list(range(n_attrs))
    assignments, weights = _assignment_tables(phi, cols)
    src = graph.edge_array[:, 0]
    dst = graph.edge_array[:, 1]
    total = 0.0
    for ra, rw in zip(assignments, weights):
        for ca, cw in zip(assignments, weights):
            p = 1.0
            for k in cols:
                p *= thetas[k][ra[k], ca[k]]
            pair_sum = rw.sum() * cw.sum() - (rw * cw).sum()
            if len(src):
                pair_sum -= (rw[src] * cw[dst]).sum()
            total += math.log1p(-p) * pair_sum
    return total


def _taylor_nonedge_total(graph, phi, thetas, thetas_sq):
    """Per-row O(N^2) sum of quadratic-approximation non-edge terms."""
    n = graph.n_nodes
    total = 0.0
    for i in range(n):
        prod1 = np.ones(n, dtype=np.float64)
        prod2 = np.ones(n, dtype=np.float64)
        for k in range(phi.shape[1]):
            prod1 *= _pair_expect(phi[i, k], phi[:, k], thetas[k])
            prod2 *= _pair_expect(phi[i, k], phi[:, k], thetas_sq[k])
        row = -prod1 - 0.5 * prod2
        total += row.sum() - row[i]
        out = graph.out_adjacency[i]
        if out.size:
            total -= row[out].sum()
    return total


def lower_bound(graph, posterior, params, mode="fast", max_nodes=DEFAULT_DENSE_CAP):
    """Evidence lower bound: E_Q[log P(A, F)] plus the posterior entropy.

    Edge terms are always computed exactly; the non-edge treatment is
    selected by `mode` (see module docstring). Exact mode is refused above
    `max_nodes`.
    """
    _check_mode(mode)
    phi = posterior.phi
    if graph.n_nodes != posterior.n_nodes:
        raise ValueError("graph and posterior disagree on node count")
    if params.n_attrs != posterior.n_attrs:
        raise ValueError("params and posterior disagree on attribute count")
    if mode == "exact" and graph.n_nodes > max_nodes:
        raise ValueError(
            f"exact mode refused for n_nodes={graph.n_nodes} > cap {max_nodes}"
        )

    thetas = params.thetas
    thetas_sq = thetas**2
    log_thetas = np.log(thetas)
    src = graph.edge_array[:, 0]
    dst = graph.edge_array[:, 1]

    edge_total = float(_edge_log_expect(phi, log_thetas, src, dst).sum())

    n = graph.n_nodes
    if mode == "fast":
        counters.pair_terms += graph.n_edges
        counters.generic_terms += 1
        prod1 = 1.0
        prod2 = 1.0
        for k in range(params.n_attrs):
            prod1 *= _pair_expect(params.mu[k], params.mu[k], thetas[k])
            prod2 *= _pair_expect(params.mu[k], params.mu[k], thetas_sq[k])
        nonedge_total = n * (n - 1) * (-prod1 - 0.5 * prod2)
        if len(src):
            nonedge_total -= float(
                _taylor_nonedge(phi, thetas, thetas_sq, src, dst).sum()
            )
    elif mode == "taylor":
        counters.pair_terms += n * (n - 1)
        nonedge_total = _taylor_nonedge_total(graph, phi, thetas, thetas_sq)
    else:
        counters.pair_terms += n * (n - 1)
        nonedge_total = _exact_nonedge_total(graph, phi, thetas)

    prior_total = float(
        (phi * np.log(params.mu) + (1.0 - phi) * np.log1p(-params.mu)).sum()
    )
    return edge_total + nonedge_total + prior_total + _entropy(phi)


# ---------------------------------------------------------------------------
# M-step
# ---------------------------------------------------------------------------


def m_step_mu(posterior):
    """Closed-form prior update: per-column posterior means, clamped."""
    mu = posterior.phi.mean(axis=0)
    return np.clip(mu, posterior.eps, 1.0 - posterior.eps)


def _edge_outer(phi, l, src, dst):
    """2x2 matrix of summed Q_src(z1) Q_dst(z2) products over pair arrays."""
    a1 = phi[src, l]
    b1 = phi[dst, l]
    return np.array(
        [
            [((1 - a1) * (1 - b1)).sum(), ((1 - a1) * b1).sum()],
            [(a1 * (1 - b1)).sum(), (a1 * b1).sum()],
        ]
    )


def theta_gradient(graph, posterior, params, l, mode="fast"):
    """Gradient of the pairwise lower-bound terms w.r.t. thetas[l].

    Edge pairs contribute ``Q_il(z1) Q_jl(z2) / theta``; non-edge pairs
    contribute the gradient of the quadratic approximation. ``exact`` and
    ``taylor`` sum pair by pair; ``fast`` uses the empty-graph
    decomposition under the priors.
    """
    _check_mode(mode)
    phi = posterior.phi
    thetas = params.thetas
    thetas_sq = thetas**2
    n = graph.n_nodes
    n_attrs = params.n_attrs
    src = graph.edge_array[:, 0]
    dst = graph.edge_array[:, 1]
    others = [k for k in range(n_attrs) if k != l]

    grad = _edge_outer(phi, l, src, dst) / thetas[l]

    if mode == "fast":
        counters.pair_terms += graph.n_edges
        counters.generic_terms += 1
        prod1 = 1.0
        prod2 = 1.0
        for k in others:
            prod1 *= _pair_expect(params.mu[k], params.mu[k], thetas[k])
            prod2 *= _pair_expect(params.mu[k], params.mu[k], thetas_sq[k])
        qmu = np.array([1.0 - params.mu[l], params.mu[l]])
        outer = np.outer(qmu, qmu)
        grad += n * (n - 1) * (-outer * (prod1 + thetas[l] * prod2))
        if len(src):
            pair1 = np.ones(len(src), dtype=np.float64)
            pair2 = np.ones(len(src), dtype=np.float64)
            for k in others:
                pair1 *= _pair_expect(phi[src, k], phi[dst, k], thetas[k])
                pair2 *= _pair_expect(phi[src, k], phi[dst, k], thetas_sq[k])
            a1 = phi[src, l]
            b1 = phi[dst, l]
            for z1 in (0, 1):
                for z2 in (0, 1):
                    w = (a1 if z1 else 1 - a1) * (b1 if z2 else 1 - b1)
                    adj = (w * (pair1 + thetas[l][z1, z2] * pair2)).sum()
                    grad[z1, z2] += adj
        return grad

    counters.pair_terms += n * (n - 1)
    for i in range(n):
        prod1 = np.ones(n, dtype=np.float64)
        prod2 = np.ones(n, dtype=np.float64)
        for k in others:
            prod1 *= _pair_expect(phi[i, k], phi[:, k], thetas[k])
            prod2 *= _pair_expect(phi[i, k], phi[:, k], thetas_sq[k])
        nonedge = np.ones(n, dtype=bool)
        nonedge[i] = False
        nonedge[graph.out_adjacency[i]] = False
        qi = (1.0 - phi[i, l], phi[i, l])
        qj = (1.0 - phi[:, l], phi[:, l])
        for z1 in (0, 1):
            for z2 in (0, 1):
                w = qi[z1] * qj[z2][nonedge]
                grad[z1, z2] -= (
                    w * (prod1[nonedge] + thetas[l][z1, z2] * prod2[nonedge])
                ).sum()
    return grad


def m_step(graph, posterior, params, config):
    """Closed-form prior update followed by clamped gradient ascent on the
    affinity matrices (simultaneous per-step gradients across attributes).

    The raw gradient sums over ordered pairs and scales with the graph;
    the step divides it by the edge count so the configured rate stays
    meaningful (and close to the curvature scale of the edge terms) at
    any size.
    """
    mu = m_step_mu(posterior)
    thetas = params.thetas.copy()
    lo, hi = config.eps, 1.0 - config.eps
    scale = max(graph.n_edges, 1)
    for _ in range(config.mstep_iters):
        current = MagParams(mu=mu, thetas=thetas)
        grads = np.stack(
            [
                theta_gradient(graph, posterior, current, l, mode=config.mode)
                for l in range(current.n_attrs)
            ]
        )
        thetas = np.clip(thetas + config.mstep_rate * grads / scale, lo, hi)
    return MagParams(mu=mu, thetas=thetas)


# ---------------------------------------------------------------------------
# E-step
# ---------------------------------------------------------------------------


def e_step(graph, posterior, params, config, rng=None):
    """Stochastic-gradient rounds on the latent posterior entries.

    Each round snapshots phi, samples a batch of latent entries without
    replacement, and applies clamped gradient steps computed against the
    snapshot. Deterministic given the RNG (defaults to config.seed).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    latent_cols = posterior.latent_columns()
    if latent_cols.size == 0:
        return posterior.copy()

    n = posterior.n_nodes
    entries = [(i, l) for l in latent_cols for i in range(n)]
    batch = config.batch_size
    if batch is None:
        batch = max(n * posterior.n_attrs // 10, 1)
    batch = min(batch, len(entries))
    lo, hi = config.eps, 1.0 - config.eps

    current = posterior.copy()
    use_mi = config.lambda_mi > 0 and posterior.n_attrs > 1
    for _ in range(config.estep_iters):
        snapshot = current
        phi_new = snapshot.phi.copy()
        if use_mi:
            marginals, joints = _mi_tables(snapshot.phi)
        chosen = rng.choice(len(entries), size=batch, replace=False)
        for idx in chosen:
            i, l = entries[idx]
            g = phi_gradient(graph, snapshot, params, i, l, mode=config.mode)
            if use_mi:
                g -= config.lambda_mi * _mi_gradient_from_tables(
                    snapshot.phi, marginals, joints, i, l
                )
            phi_new[i, l] = min(
                max(snapshot.phi[i, l] + config.estep_rate * g, lo), hi
            )
        current = VariationalPosterior(
            phi=phi_new, fixed=snapshot.fixed.copy(), eps=snapshot.eps
        )
    return current


# ---------------------------------------------------------------------------
# Full EM loop and forward selection
# ---------------------------------------------------------------------------


def fit(graph, config, fixed_attrs=None):
    """Alternate E- and M-steps until the lower bound stabilizes.

    If `fixed_attrs` is given, its columns are pinned as the first
    attribute columns (the remainder stay latent). Convergence is declared
    when the relative lower-bound change drops below ``config.tol``; the
    bound is always tracked on the fast-mode evaluation, which is what the
    fast path optimizes.
    """
    n = graph.n_nodes
    n_attrs = config.n_attrs
    rng = np.random.default_rng(config.seed)

    mu = rng.uniform(0.2, 0.8, size=n_attrs)
    thetas = rng.uniform(0.2, 0.8, size=(n_attrs, 2, 2))
    phi = rng.uniform(0.3, 0.7, size=(n, n_attrs))
    fixed = np.zeros(n_attrs, dtype=bool)
    if fixed_attrs is not None:
        if fixed_attrs.n_nodes != n:
            raise ValueError("fixed attributes disagree with graph on node count")
        if fixed_attrs.n_attrs > n_attrs:
            raise ValueError("more fixed attribute columns than config.n_attrs")
        k = fixed_attrs.n_attrs
        phi[:, :k] = np.where(fixed_attrs.bits == 1, 1.0 - config.eps, config.eps)
        fixed[:k] = True

    posterior = VariationalPosterior(phi=phi, fixed=fixed, eps=config.eps)
    params = MagParams(mu=mu, thetas=thetas)

    eta_e, eta_m = config.estep_rate, config.mstep_rate
    trace = []
    converged = False
    prev = None
    for round_index in range(1, config.em_rounds + 1):
        round_config = replace(config, estep_rate=eta_e, mstep_rate=eta_m)
        posterior = e_step(graph, posterior, params, round_config, rng=rng)
        params = m_step(graph, posterior, params, round_config)
        lq = lower_bound(graph, posterior, params, mode="fast")
        if not math.isfinite(lq):
            raise NumericalError(
                "lower bound became non-finite", round_index=round_index
            )
        trace.append(lq)
        if prev is None:
            rel = 1.0
        else:
            rel = abs(lq - prev) / max(abs(lq), 1e-300)
            if lq < prev - 0.05 * abs(prev):
                eta_e *= 0.5
                eta_m *= 0.5
        if rel < config.tol:
            converged = True
            break
        prev = lq
    return FitResult(
        params=params,
        posterior=posterior,
        lq_trace=np.array(trace),
        converged=converged,
        rounds_used=len(trace),
    )


def forward_select(graph, candidates, k, config):
    """Greedy forward selection of k candidate attribute columns.

    Each step pins the already-selected columns plus one candidate and
    fits the affinities; the candidate with the best fitted lower bound
    joins the set (ties break to the lowest column index). Returns the
    selected indices and the fit for the full selected set.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > candidates.n_attrs:
        raise ValueError("k exceeds the number of candidate columns")
    selected = []
    best_result = None
    remaining = list(range(candidates.n_attrs))
    for _ in range(k):
        best_col = None
        best_score = None
        best_fit = None
        for col in remaining:
            cols = selected + [col]
            sub = BinaryAttributeMatrix(bits=candidates.bits[:, cols])
            sub_config = replace(config, n_attrs=len(cols))
            result = fit(graph, sub_config, fixed_attrs=sub)
            score = result.lq_trace[-1]
            if best_score is None or score > best_score:
                best_col, best_score, best_fit = col, score, result
        selected.append(best_col)
        remaining.remove(best_col)
        best_result = best_fit
    return selected, best_result


def posterior_adjacency(posterior, params, max_nodes=DEFAULT_DENSE_CAP):
    """Expected link-probability matrix under the posterior.

    ``P_ij = prod_l E[theta_l[F_il, F_jl]]`` with the per-entry posterior
    factors; for a pinned posterior this reduces to the concrete-attribute
    adjacency up to clamp terms. Desk scale only.
    """
    n = posterior.n_nodes
    if n > max_nodes:
        raise ValueError(f"dense adjacency refused for n_nodes={n} > cap {max_nodes}")
    if params.n_attrs != posterior.n_attrs:
        raise ValueError("params and posterior disagree on attribute count")
    p = np.ones((n, n), dtype=np.float64)
    for l in range(params.n_attrs):
        q = np.stack([1.0 - posterior.phi[:, l], posterior.phi[:, l]], axis=1)
        p *= q @ params.thetas[l] @ q.T
    return ProbAdjacency(values=p)


# ---------------------------------------------------------------------------
# Posterior serialization
# ---------------------------------------------------------------------------


def write_posterior(posterior, path):
    """CSV dump: one row per (node, attr) with the phi value and mode flag."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "attr", "phi", "mode"])
        for i in range(posterior.n_nodes):
            for l in range(posterior.n_attrs):
                mode = "fixed" if posterior.fixed[l] else "latent"
                writer.writerow([i, l, repr(float(posterior.phi[i, l])), mode])


def read_posterior(path):
    """Inverse of :func:`write_posterior`."""
    entries = {}
    fixed_cols = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["node", "attr", "phi", "mode"]:
            raise ValueError(f"unexpected posterior header: {header}")
        for row in reader:
            i, l = int(row[0]), int(row[1])
            entries[(i, l)] = float(row[2])
            fixed_cols[l] = row[3] == "fixed"
    if not entries:
        raise ValueError("posterior file holds no entries")
    n = 1 + max(i for i, _ in entries)
    n_attrs = 1 + max(l for _, l in entries)
    phi = np.empty((n, n_attrs), dtype=np.float64)
    for (i, l), value in entries.items():
        phi[i, l] = value
    fixed = np.array([fixed_cols.get(l, False) for l in range(n_attrs)])
    return VariationalPosterior(phi=phi, fixed=fixed)
