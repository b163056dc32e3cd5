"""Evolution Strategies vs Finite Differences gradient estimators."""

from .errors import DomainError, EvaluationError, NumericalConsistencyError, UsageError
from .estimators import (
    EstimatorKind,
    GradientEstimate,
    central_sum,
    es_gradient,
    estimate_all,
    evaluate_batch,
    fd_gradient,
    gradient_difference,
    scaled_fd_gradient,
)
from .objectives import Objective, ObjectiveSpec, check_gradient, make_objective
from .sampling import PerturbationBatch, mirror_batch, sample_batch
from .specfun import (
    ChiStats,
    chi_mean,
    chi_stats,
    chi_variance,
    gamma_ratio_asymptotic,
    gamma_ratio_exact,
    log_gamma_ratio,
)

__version__ = "0.1.0"
