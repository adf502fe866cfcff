"""Shared oracles and fixture builders for the test suite.

Everything here is deliberately naive: brute-force enumerations, per-pair
loops, and finite differences, independent of the library's computation
paths.
"""

import itertools
import math

import numpy as np

from mag.graphs import BinaryAttributeMatrix, DirectedGraph
from mag.magfit import VariationalPosterior
from mag.model import MagParams, edge_probability


def random_instance(seed, n, n_attrs, density=0.35, phi_range=(0.15, 0.85)):
    """Seeded random (graph, params, posterior) triple for property sweeps."""
    rng = np.random.default_rng(seed)
    pairs = [
        (i, j)
        for i in range(n)
        for j in range(n)
        if i != j and rng.random() < density
    ]
    graph = DirectedGraph(n, pairs)
    params = MagParams(
        mu=rng.uniform(0.2, 0.8, n_attrs),
        thetas=rng.uniform(0.1, 0.9, (n_attrs, 2, 2)),
    )
    posterior = VariationalPosterior(phi=rng.uniform(*phi_range, (n, n_attrs)))
    return graph, params, posterior


def uniform_random_graph(n, e, seed):
    """Directed graph with exactly e distinct uniform ordered pairs."""
    rng = np.random.default_rng(seed)
    chosen = set()
    while len(chosen) < e:
        need = e - len(chosen)
        src = rng.integers(0, n, size=need)
        dst = rng.integers(0, n, size=need)
        for s, d in zip(src, dst):
            if s != d and len(chosen) < e:
                chosen.add((int(s), int(d)))
    return DirectedGraph(n, sorted(chosen))


def naive_joint_log_likelihood(graph, attrs, params):
    """Pair-by-pair, attribute-by-attribute log-likelihood loop."""
    total = 0.0
    bits = attrs.bits
    n = graph.n_nodes
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            p = edge_probability(bits[i], bits[j], params.thetas)
            total += math.log(p) if graph.has_edge(i, j) else math.log1p(-p)
    for i in range(n):
        for l in range(attrs.n_attrs):
            mu = params.mu[l]
            total += math.log(mu) if bits[i, l] else math.log1p(-mu)
    return total


def naive_graph_log_likelihood(graph, attrs, thetas):
    total = 0.0
    bits = attrs.bits
    for i in range(graph.n_nodes):
        for j in range(graph.n_nodes):
            if i == j:
                continue
            p = edge_probability(bits[i], bits[j], thetas)
            total += math.log(p) if graph.has_edge(i, j) else math.log1p(-p)
    return total


def enumerate_states(n, n_attrs):
    for bits in itertools.product((0, 1), repeat=n * n_attrs):
        yield np.array(bits, dtype=np.int8).reshape(n, n_attrs)


def brute_lower_bound(graph, posterior, params):
    """sum_F Q(F) (log P(A, F) - log Q(F)) over all attribute states."""
    phi = posterior.phi
    total = 0.0
    for state in enumerate_states(graph.n_nodes, params.n_attrs):
        q = float(np.prod(np.where(state == 1, phi, 1.0 - phi)))
        lp = naive_joint_log_likelihood(
            graph, BinaryAttributeMatrix(bits=state), params
        )
        total += q * (lp - math.log(q))
    return total


def brute_log_marginal(graph, n_attrs, params):
    """log sum_F P(A, F) over all attribute states."""
    acc = -np.inf
    for state in enumerate_states(graph.n_nodes, n_attrs):
        lp = naive_joint_log_likelihood(
            graph, BinaryAttributeMatrix(bits=state), params
        )
        acc = np.logaddexp(acc, lp)
    return float(acc)


def enumerated_attr_score(graph, posterior, params, i, l, value):
    """Oracle for the per-entry value score: full enumeration over the
    attributes of all other nodes plus node i's other attributes."""
    phi = posterior.phi
    n, n_attrs = phi.shape
    others = [k for k in range(n_attrs) if k != l]
    other_nodes = [j for j in range(n) if j != i]
    slots = [(j, k) for j in other_nodes for k in range(n_attrs)]
    slots += [(i, k) for k in others]
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(slots)):
        state = np.zeros((n, n_attrs), dtype=np.int8)
        weight = 1.0
        for (j, k), b in zip(slots, bits):
            state[j, k] = b
            weight *= phi[j, k] if b else 1.0 - phi[j, k]
        state[i, l] = value
        contribution = 0.0
        for j in other_nodes:
            p_out = edge_probability(state[i], state[j], params.thetas)
            p_in = edge_probability(state[j], state[i], params.thetas)
            contribution += (
                math.log(p_out) if graph.has_edge(i, j) else math.log1p(-p_out)
            )
            contribution += (
                math.log(p_in) if graph.has_edge(j, i) else math.log1p(-p_in)
            )
        total += weight * contribution
    mu = params.mu[l]
    total += math.log(mu) if value else math.log1p(-mu)
    return total


def central_difference(fn, x, h=1e-5):
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def dense_svd(graph):
    """Full dense decomposition oracle."""
    return np.linalg.svd(graph.dense_adjacency())
