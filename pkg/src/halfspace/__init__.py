"""Toolkit for multidimensional random walks killed on leaving the upper half
space: exact lattice computation, seeded Monte Carlo, and asymptotic
predictors for local probabilities and Green functions."""

from .errors import (
    BoxOverflowError,
    FitError,
    HalfSpaceError,
    InsufficientSamplesError,
    ParameterError,
    QuadratureError,
    RangeError,
    ResolutionError,
)
from .stable import (
    CachedStableDensity1D,
    ScalingSeq,
    StableParams,
    TailProfile,
    isotropic_stable_density,
    levy_tail_constant,
    limit_scale,
    mu_truncated,
    positivity_rho,
    scaling_c,
    stable_cf_1d,
    stable_density_1d,
)
from .steps import (
    ParetoStep,
    StepDistribution,
    isotropic_pareto_lattice_2d,
    nn_2d,
    pareto_lattice_1d,
    srw_1d,
    step_from_config,
    three_point_1d,
)

__version__ = "0.1.0"
