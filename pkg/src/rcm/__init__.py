"""Random-cluster model with site-dependent external fields on boxes of Z^d."""

from .field import (
    Couplings,
    ExternalField,
    IncompatibleFieldError,
    ModelParams,
    ModelTemplate,
    check_compatibility,
    couplings_leq,
    decaying_field,
    decaying_values,
    field_leq,
    l1_norm,
    q_max,
)
from .lattice import Graph, build_box, build_graph, clusters, connected, euclidean_sphere
from .measure import (
    MeasureTable,
    bernoulli_table,
    cluster_weight,
    config_weight,
    enumerate_measure,
    exact_connectivity,
    exact_expectation,
)
from .observables import (
    finite_chi,
    finite_theta,
    fit_decay,
    radius_curve,
    radius_probability,
    scan_beta_c,
    two_point,
)
from .sampler import ChainConfig, ChainState, bernoulli_sample, run_chain, run_chains
from .verify import VerdictReport, run_suite

__version__ = "0.1.0"
