"""Large-deviation rate functions for sums of freely independent matrices.

The package is organized bottom-up:

* :mod:`freeldp.measures` — compactly supported probability measures
  (atomic, piecewise-linear grids, named families) with Stieltjes-transform
  primitives.
* :mod:`freeldp.transforms` — inverse transforms on the real line
  (``k_inverse``, ``r_transform``, ``q_inverse``), the R-transform
  antiderivative, log-potentials, and a bounded-Lipschitz distance.
* :mod:`freeldp.convolution` — free additive convolution via subordination
  and exact transform additivity.
* :mod:`freeldp.rates` — large-deviation rate functions for the extreme
  eigenvalue of a sum of two randomly rotated matrices.
* :mod:`freeldp.deformed` — rate functions for models with finitely many
  spike eigenvalues added to the base spectra.
* :mod:`freeldp.simulate` — finite-N Monte Carlo: invariant ensembles,
  spherical integrals, tilted tail estimators.
* :mod:`freeldp.acceptance` — the nine-criterion acceptance suite.
* :mod:`freeldp.cli` — command-line entry points.
"""

from __future__ import annotations

from .errors import ConfigError, ConvergenceError, DomainError, NumericalError
from .measures import (
    AtomicMeasure,
    GridMeasure,
    Measure,
    SemicircleMeasure,
    SupportInfo,
    UniformMeasure,
    bernoulli_measure,
    dirac_measure,
    measure_from_json,
    parse_named_measure,
)
from .policy import NumericPolicy, default_policy, policy_from_env
from .transforms import (
    bl_distance,
    g_at_edge,
    g_at_left_edge,
    integral_r,
    k_inverse,
    log_potential,
    q_inverse,
    r_transform,
    stieltjes,
)
from .convolution import (
    ConvolutionOutput,
    FreeConvolution,
    GridSpec,
    check_nodown,
    check_noout,
    edge_left,
    edge_right,
    free_add,
    subordination_fixed_point,
)
from .rates import (
    ConditionError,
    ModelSpec,
    RateEvaluation,
    i_derivative,
    i_theta,
    j_limit,
    rate_max,
    rate_min,
    theta_star,
)
from .deformed import (
    PushforwardMeasure,
    SpikeSpec,
    alpha_minus,
    alpha_plus,
    h_alpha_x,
    l_rate,
    pushforward_mu_x,
    t_minus,
    t_plus,
)
from .simulate import (
    DeformedDraw,
    EnsembleSpec,
    McEstimate,
    TailEstimate,
    TiltConfig,
    TiltResult,
    empirical_measure,
    haar_sample,
    mean_empirical,
    replica_rng,
    sample_H,
    sample_deformed,
    sample_eigenvalues,
    secular_residual,
    spectrum_from_measure,
    spherical_exact_beta2,
    spherical_integral_mc,
    tail_probability_mc,
    tilted_sampler,
    weighted_resolvent,
)
from .acceptance import CriterionResult, run_all

__all__ = [
    "AtomicMeasure",
    "ConditionError",
    "ConfigError",
    "ConvergenceError",
    "ConvolutionOutput",
    "CriterionResult",
    "DeformedDraw",
    "DomainError",
    "EnsembleSpec",
    "FreeConvolution",
    "GridMeasure",
    "GridSpec",
    "McEstimate",
    "Measure",
    "ModelSpec",
    "NumericPolicy",
    "NumericalError",
    "PushforwardMeasure",
    "RateEvaluation",
    "SemicircleMeasure",
    "SpikeSpec",
    "SupportInfo",
    "TailEstimate",
    "TiltConfig",
    "TiltResult",
    "UniformMeasure",
    "alpha_minus",
    "alpha_plus",
    "bernoulli_measure",
    "bl_distance",
    "check_nodown",
    "check_noout",
    "default_policy",
    "dirac_measure",
    "edge_left",
    "edge_right",
    "empirical_measure",
    "free_add",
    "g_at_edge",
    "g_at_left_edge",
    "h_alpha_x",
    "haar_sample",
    "i_derivative",
    "i_theta",
    "integral_r",
    "j_limit",
    "k_inverse",
    "l_rate",
    "log_potential",
    "mean_empirical",
    "measure_from_json",
    "parse_named_measure",
    "policy_from_env",
    "pushforward_mu_x",
    "q_inverse",
    "r_transform",
    "rate_max",
    "rate_min",
    "replica_rng",
    "run_all",
    "sample_H",
    "sample_deformed",
    "sample_eigenvalues",
    "secular_residual",
    "spectrum_from_measure",
    "spherical_exact_beta2",
    "spherical_integral_mc",
    "stieltjes",
    "subordination_fixed_point",
    "t_minus",
    "t_plus",
    "tail_probability_mc",
    "theta_star",
    "tilted_sampler",
    "weighted_resolvent",
]

__version__ = "0.1.0"
