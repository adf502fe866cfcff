"""Logistic-regression edge model over endpoint attributes.

Predicts ``P(i -> j) = sigmoid(c + alpha . F_i + beta . F_j)`` and is
trained on every ordered pair i != j by full-batch gradient ascent on the
mean Bernoulli log-likelihood. Serves as the additive-model comparison
point for the multiplicative fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError


@dataclass
class LogisticParams:
    """Intercept plus source- and destination-side attribute weights."""

    intercept: float
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 1:
            raise ValueError("alpha and beta must be 1-D and of equal length")
        if not (
            np.isfinite(self.intercept)
            and np.isfinite(self.alpha).all()
            and np.isfinite(self.beta).all()
        ):
            raise ValueError("parameters must be finite")


@dataclass
class BaselineConfig:
    step: float = 0.1
    max_iters: int = 2000
    tol: float = 1e-6
    pair_cap: int = 25_000_000

    def __post_init__(self):
        if self.step <= 0 or self.tol <= 0 or self.max_iters < 1:
            raise ValueError("step, tol must be > 0 and max_iters >= 1")


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))


def logistic_edge_prob(params, f_i, f_j):
    """Predicted link probability for one ordered attribute-vector pair."""
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    if f_i.shape != (params.alpha.size,) or f_j.shape != (params.beta.size,):
        raise ValueError("attribute vectors must match the weight length")
    z = params.intercept + params.alpha @ f_i + params.beta @ f_j
    return float(_sigmoid(z))


def _logits(params, bits):
    a = bits @ params.alpha
    b = bits @ params.beta
    return params.intercept + a[:, None] + b[None, :]


def logistic_prob_matrix(params, attrs):
    """Dense matrix of predicted probabilities (diagonal meaningless)."""
    return _sigmoid(_logits(params, attrs.bits.astype(np.float64)))


def logistic_log_likelihood(params, graph, attrs):
    """Bernoulli log-likelihood over all ordered pairs i != j."""
    z = _logits(params, attrs.bits.astype(np.float64))
    n = graph.n_nodes
    off = ~np.eye(n, dtype=bool)
    # log sigma(z) = -log(1 + e^-z); log(1 - sigma(z)) = -log(1 + e^z)
    log_q = -np.logaddexp(0.0, z)
    total = float(log_q[off].sum())
    src = graph.edge_array[:, 0]
    dst = graph.edge_array[:, 1]
    if src.size:
        z_edges = z[src, dst]
        total += float((-np.logaddexp(0.0, -z_edges) - log_q[src, dst]).sum())
    return total


def _mean_gradient(params, graph, attrs):
    bits = attrs.bits.astype(np.float64)
    n = graph.n_nodes
    resid = -_sigmoid(_logits(params, bits))
    np.fill_diagonal(resid, 0.0)
    src = graph.edge_array[:, 0]
    dst = graph.edge_array[:, 1]
    if src.size:
        resid[src, dst] += 1.0
    pairs = n * (n - 1)
    g_c = resid.sum() / pairs
    g_alpha = bits.T @ resid.sum(axis=1) / pairs
    g_beta = bits.T @ resid.sum(axis=0) / pairs
    return g_c, g_alpha, g_beta


def fit_logistic(graph, attrs, config=None, history=None):
    """Maximize the pairwise Bernoulli log-likelihood by gradient ascent.

    The step applies to the per-pair mean gradient; iteration stops when
    its norm drops below ``config.tol``, and hitting ``max_iters`` first
    raises a ConvergenceError carrying the final norm. When `history` is
    a list, the log-likelihood after every update is appended to it.

    The intercept starts at the density logit (the intercept-only
    optimum); weights start at zero. The objective is concave, so the
    start point only affects iteration count.
    """
    config = config or BaselineConfig()
    n = graph.n_nodes
    if attrs.n_nodes != n:
        raise ValueError("graph and attribute matrix disagree on node count")
    if n * (n - 1) > config.pair_cap:
        raise ValueError(
            f"full-pair training refused: {n * (n - 1)} pairs > cap {config.pair_cap}"
        )
    if n * (n - 1) == 0:
        raise ValueError("need at least two nodes")

    density = min(max(graph.n_edges / (n * (n - 1)), 1e-12), 1 - 1e-12)
    params = LogisticParams(
        intercept=math.log(density / (1.0 - density)),
        alpha=np.zeros(attrs.n_attrs),
        beta=np.zeros(attrs.n_attrs),
    )
    for _ in range(config.max_iters):
        g_c, g_alpha, g_beta = _mean_gradient(params, graph, attrs)
        grad_norm = float(np.sqrt(g_c**2 + (g_alpha**2).sum() + (g_beta**2).sum()))
        if grad_norm <= config.tol:
            return params
        params = LogisticParams(
            intercept=params.intercept + config.step * g_c,
            alpha=params.alpha + config.step * g_alpha,
            beta=params.beta + config.step * g_beta,
        )
        if history is not None:
            history.append(logistic_log_likelihood(params, graph, attrs))
    g_c, g_alpha, g_beta = _mean_gradient(params, graph, attrs)
    grad_norm = float(np.sqrt(g_c**2 + (g_alpha**2).sum() + (g_beta**2).sum()))
    if grad_norm <= config.tol:
        return params
    raise ConvergenceError(
        f"logistic fit did not reach tolerance {config.tol:g} "
        f"within {config.max_iters} iterations",
        residual=grad_norm,
    )
