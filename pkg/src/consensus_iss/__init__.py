"""Certified distributed consensus optimization with the Wang-Elia algorithm.

Subpackages in dependency order: ``lincore`` (linear algebra), ``network``
(graphs and weight matrices), ``problem`` (costs and equilibria),
``dynamics`` (update maps and rollouts), ``certify`` (Lyapunov certificate
and trajectory checks) and ``harness`` (configs, experiments, CLI plumbing).
"""

from .certify import (
    Certificate,
    build_error_system,
    check_delta_v,
    check_iss_bound,
    compute_certificate,
    distance_series,
    empirical_rate,
    integral_average_diagnostic,
)
from .dynamics import (
    AlgorithmState,
    PerturbationSpec,
    Stepper,
    TrajectoryRecord,
    rollout,
)
from .errors import ConsensusISSError
from .harness import ExperimentConfig, parse_config, reproduce_fig2, run_experiment, sweep
from .lincore import build_dispersion_basis
from .network import (
    Graph,
    build_k_custom,
    build_k_metropolis,
    build_stochastic_pair,
    builtin_graph,
    parse_edge_list,
    validate_k,
)
from .problem import build_equilibrium, make_quadratic_problem

__version__ = "0.1.0"

__all__ = [
    "AlgorithmState",
    "Certificate",
    "ConsensusISSError",
    "ExperimentConfig",
    "Graph",
    "PerturbationSpec",
    "Stepper",
    "TrajectoryRecord",
    "build_dispersion_basis",
    "build_equilibrium",
    "build_error_system",
    "build_k_custom",
    "build_k_metropolis",
    "build_stochastic_pair",
    "builtin_graph",
    "check_delta_v",
    "check_iss_bound",
    "compute_certificate",
    "distance_series",
    "empirical_rate",
    "integral_average_diagnostic",
    "make_quadratic_problem",
    "parse_config",
    "parse_edge_list",
    "reproduce_fig2",
    "rollout",
    "run_experiment",
    "sweep",
    "validate_k",
]
