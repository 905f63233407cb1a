"""Coverage and local-delay toolkit for K-tier cache-aided heterogeneous networks.

Two independent engines share one configuration model:

* :mod:`cachenet.analytic` evaluates the integral and closed-form expressions
  for association probability, coverage probability and local delay;
* :mod:`cachenet.mc` simulates Poisson layouts directly and estimates the same
  quantities with confidence intervals.

The ``cachenet`` command line front-end (:mod:`cachenet.cli`) runs single
evaluations, parameter sweeps to CSV, and engine cross-checks.
"""

from .analytic import (
    INFINITE,
    CoverageBreakdown,
    DelayBreakdown,
    DelayValue,
    RhoKind,
    association_probability,
    coverage,
    coverage_equal_alpha,
    coverage_tier,
    delay,
    delay_equal_alpha,
    delay_tier,
    rho,
)
from .errors import (
    CacheNetError,
    ConfigInvalid,
    DivergenceSuspected,
    DomainError,
    FileUncached,
    IndexOutOfRange,
    NoConvergence,
    NonFiniteEvaluation,
    QuadratureError,
    UnequalAlphas,
    WindowTooSmall,
    ZeroAssociationProbability,
)
from .mc import McEstimate, estimate_coverage, estimate_coverage_bernoulli, estimate_delay
from .model import (
    NetworkConfig,
    QueryParams,
    TierConfig,
    load_config,
    save_config,
    two_tier_example,
    validate_network,
)
from .quadrature import IntegrationResult, integrate_finite, integrate_semi_infinite

__version__ = "0.1.0"

__all__ = [
    "INFINITE",
    "CacheNetError",
    "ConfigInvalid",
    "CoverageBreakdown",
    "DelayBreakdown",
    "DelayValue",
    "DivergenceSuspected",
    "DomainError",
    "FileUncached",
    "IndexOutOfRange",
    "IntegrationResult",
    "McEstimate",
    "NetworkConfig",
    "NoConvergence",
    "NonFiniteEvaluation",
    "QuadratureError",
    "QueryParams",
    "RhoKind",
    "TierConfig",
    "UnequalAlphas",
    "WindowTooSmall",
    "ZeroAssociationProbability",
    "association_probability",
    "coverage",
    "coverage_equal_alpha",
    "coverage_tier",
    "delay",
    "delay_equal_alpha",
    "delay_tier",
    "estimate_coverage",
    "estimate_coverage_bernoulli",
    "estimate_delay",
    "integrate_finite",
    "integrate_semi_infinite",
    "load_config",
    "rho",
    "save_config",
    "two_tier_example",
    "validate_network",
]
