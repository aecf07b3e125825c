"""Numerical laboratory comparing the large-deviations rate functional of
Brownian particles with the entropy-Wasserstein (JKO) step functional."""

__version__ = "0.1.0"

from ._accel import BACKEND
from .bridge import (BridgeSolution, GammaPoint, LowerBoundReport, gamma_functional, gamma_point,
                     lower_bound_check, rate_functional, solve_bridge)
from .errors import (ConfigError, GridMismatchError, LdpJkoError, MonotonicityError, NonConvergenceError,
                     OverflowGuardError, SolverError, UndefinedQuantileError)
from .grid import (ADeltaSpec, GridDensity, PairDensity, entropy, in_A_delta, levy_distance, marginals,
                   pair_entropy, relative_entropy)
from .heat import KernelParams, evolve, kernel_value, reference_coupling
from .jko import JkoConfig, QuantileProfile, jko_flow, jko_run, jko_step
from .particles import ParticleEnsemble, empirical_density, empirical_pair, hydrodynamic_check, simulate
from .seminorm import (KappaKernel, TorusFunction, exponent_identity_check, fd_identity_check, h_function,
                       kappa_convolve, seminorm_sq, uksq_bound_check, xee_scaling_check)
from .tildeq import TildeQBundle, build_tilde_q, marginal_convergence_report, watson_pointwise
from .wasserstein import (TransportPotentials, coupling_cost, duality_gap, potentials, quantile,
                          w2_distance)

__all__ = [
    "__version__", "BACKEND",
    "BridgeSolution", "GammaPoint", "LowerBoundReport", "gamma_functional", "gamma_point",
    "lower_bound_check", "rate_functional", "solve_bridge",
    "ConfigError", "GridMismatchError", "LdpJkoError", "MonotonicityError", "NonConvergenceError",
    "OverflowGuardError", "SolverError", "UndefinedQuantileError",
    "ADeltaSpec", "GridDensity", "PairDensity", "entropy", "in_A_delta", "levy_distance", "marginals",
    "pair_entropy", "relative_entropy",
    "KernelParams", "evolve", "kernel_value", "reference_coupling",
    "JkoConfig", "QuantileProfile", "jko_flow", "jko_run", "jko_step",
    "ParticleEnsemble", "empirical_density", "empirical_pair", "hydrodynamic_check", "simulate",
    "KappaKernel", "TorusFunction", "exponent_identity_check", "fd_identity_check", "h_function",
    "kappa_convolve", "seminorm_sq", "uksq_bound_check", "xee_scaling_check",
    "TildeQBundle", "build_tilde_q", "marginal_convergence_report", "watson_pointwise",
    "TransportPotentials", "coupling_cost", "duality_gap", "potentials", "quantile", "w2_distance",
]
