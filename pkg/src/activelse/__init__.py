"""Active level-set estimation with binary outcomes.

Analytic look-ahead level-set posteriors and acquisition functions over a
variational probit Gaussian-process classifier, plus a benchmark harness.
"""

from .acquisition import (
    ACQUISITION_TAGS,
    GLOBAL_TAGS,
    AcquisitionKind,
    ReferenceSet,
)
from .bench import ExperimentConfig, RunTrace, run_experiment, run_many
from .errors import (
    ActiveLseError,
    ConfigError,
    DomainError,
    FitError,
    NumericError,
    OptimError,
)
from .lookahead import (
    LookaheadTerms,
    PosteriorQuery,
    gamma_from_theta,
    level_set_posterior,
    lookahead_posteriors,
    lookahead_terms,
    z_moments,
)
from .optim import OptimBudget, SobolStream, maximize
from .problems import PROBLEM_NAMES, Problem, get_problem, sample
from .surrogate import GpModel, SurrogateConfig, fit, refit_policy

__version__ = "0.1.0"

__all__ = [
    "ACQUISITION_TAGS",
    "AcquisitionKind",
    "ActiveLseError",
    "ConfigError",
    "DomainError",
    "ExperimentConfig",
    "FitError",
    "GLOBAL_TAGS",
    "GpModel",
    "LookaheadTerms",
    "NumericError",
    "OptimBudget",
    "OptimError",
    "PROBLEM_NAMES",
    "PosteriorQuery",
    "Problem",
    "ReferenceSet",
    "RunTrace",
    "SobolStream",
    "SurrogateConfig",
    "__version__",
    "fit",
    "gamma_from_theta",
    "get_problem",
    "level_set_posterior",
    "lookahead_posteriors",
    "lookahead_terms",
    "maximize",
    "refit_policy",
    "run_experiment",
    "run_many",
    "sample",
    "z_moments",
]
