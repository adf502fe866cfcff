"""Multiplicative attribute graph toolkit.

Generation from attribute priors and affinity matrices, variational EM
parameter estimation with exact and fast evaluation paths, network
statistics, and distribution-distance metrics.
"""

__version__ = "0.1.0"

from .graphs import (
    AttributeTable,
    BinaryAttributeMatrix,
    DirectedGraph,
    binarize_by_median,
    degree_counts,
    parse_attribute_table,
    parse_edge_list,
    serialize_edge_list,
)
from .model import (
    MagParams,
    ProbAdjacency,
    edge_probability,
    graph_log_likelihood_given_attrs,
    joint_log_likelihood,
    parse_params,
    prob_adjacency,
    read_params,
    sample_attributes,
    sample_graph,
    write_params,
)
from .magfit import (
    FitConfig,
    FitResult,
    VariationalPosterior,
    attr_log_score,
    e_step,
    fit,
    forward_select,
    lower_bound,
    m_step,
    m_step_mu,
    mutual_information,
    mutual_information_gradient,
    phi_gradient,
    posterior_adjacency,
    theta_gradient,
)
from .netstats import (
    CcdfSeries,
    all_statistics,
    ccdf,
    clustering_by_degree,
    degree_ccdf,
    leading_singular_vector,
    singular_values,
    triad_participation,
)
from .metrics import (
    DistanceReport,
    distance_report,
    ks_log,
    l2_log,
    prob_log_likelihood,
    tpi,
)
from .baseline import (
    BaselineConfig,
    LogisticParams,
    fit_logistic,
    logistic_edge_prob,
    logistic_log_likelihood,
)

__all__ = [name for name in dir() if not name.startswith("_")]
