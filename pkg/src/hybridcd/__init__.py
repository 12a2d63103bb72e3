"""Curvature-dimension calculus for heat flows on R^n x (finite graph)."""

from .cd import (
    CdParams,
    CdReport,
    OptimizerConfig,
    SamplerConfig,
    analytic_d_complete,
    analytic_d_ricci_flat,
    cd_upsilon_check_at,
    cd_upsilon_estimate_min_d,
    discrete_d,
    hybrid_d_for_euclidean,
    tensorise,
)
from .graph import GraphError, WeightedGraph, load_graph
from .heat import GaussianMixtureSolution, MixtureTerm, exact_derivs, simulate
from .ricci import certify, certify_at, verify_certificate
from .upsilon import c_of_r, nu, nu_ratio, upsilon, upsilon_prime

__version__ = "0.1.0"
