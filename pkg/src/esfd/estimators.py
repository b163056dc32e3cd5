"""Finite Differences and Evolution Strategies gradient estimators.

All four estimators are weighted sums of the same perturbations,

    FD          (1/lam) sum eps_i (R(theta+eps_i) - R(theta)) / ||eps_i||^2
    ES          (1/lam) sum eps_i  R(theta+eps_i)
    SCALED_FD   chi_mean(n, sigma)^2 * FD
    CENTRAL_SUM (1/lam) sum eps_i (R(theta+eps_i) - R(theta))

so they share one set of objective evaluations and one reduction pass.
ES follows the two-term form above with no 1/sigma^2; pass
``normalize_es=True`` for the usual literature scaling.

ES - CENTRAL_SUM is exactly R(theta) (1/lam) sum eps_i, the noise term that
separates the two methods.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import EvaluationError, NumericalConsistencyError, UsageError
from .objectives import Objective
from .reduce import neumaier_sum
from .sampling import PerturbationBatch
from .specfun import chi_mean

DIFF_RTOL = 1e-10
DIFF_ATOL = 1e-14


class EstimatorKind(str, enum.Enum):
    FD = "FD"
    ES = "ES"
    SCALED_FD = "SCALED_FD"
    CENTRAL_SUM = "CENTRAL_SUM"


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    vector: np.ndarray
    kind: EstimatorKind
    lam: int
    sigma: float
    seed: int
    r_theta: Optional[float] = None
    normalized: bool = False


@dataclass(frozen=True, eq=False)
class Evaluations:
    """R(theta) and R(theta + eps_i) for one batch."""

    r_theta: float
    values: np.ndarray


def evaluate_batch(
    batch: PerturbationBatch, objective: Objective, threads: Optional[int] = None
) -> Evaluations:
    """Evaluate the objective once at the centre and once per perturbation.

    With ``threads > 1`` the per-sample calls go through a thread pool; results
    are collected by index so the output does not depend on scheduling.
    """
    if objective.dim != batch.n:
        raise UsageError(f"objective dim {objective.dim} does not match batch dim {batch.n}")
    r_theta = float(objective.evaluate(batch.theta))
    if not math.isfinite(r_theta):
        raise EvaluationError(f"objective is {r_theta} at theta", index=None)
    alphas = batch.alphas()
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(objective.evaluate, alphas))
    else:
        values = [objective.evaluate(a) for a in alphas]
    values = np.array(values, dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise EvaluationError(f"objective is {values[i]} at sample {i}", index=i)
    values.flags.writeable = False
    return Evaluations(r_theta, values)


def _weighted_means(eps: np.ndarray, weights: list[np.ndarray]) -> list[np.ndarray]:
    """(1/lam) sum_i w_i eps_i for each weight vector, in one fixed-order pass."""
    lam, n = eps.shape
    terms = np.concatenate([eps * w[:, None] for w in weights], axis=1)
    sums = neumaier_sum(terms)
    return [sums[k * n:(k + 1) * n] / lam for k in range(len(weights))]


def estimate_all(
    batch: PerturbationBatch,
    objective: Objective,
    kinds: Iterable[EstimatorKind | str] = tuple(EstimatorKind),
    *,
    evaluations: Optional[Evaluations] = None,
    normalize_es: bool = False,
) -> dict[EstimatorKind, GradientEstimate]:
    """Compute several estimates on one batch from a single set of evaluations."""
    kinds = [EstimatorKind(k) for k in kinds]
    ev = evaluations if evaluations is not None else evaluate_batch(batch, objective)
    if ev.values.shape[0] != batch.lam:
        raise UsageError("evaluations do not belong to this batch")
    delta = ev.values - ev.r_theta

    weights = {}
    if EstimatorKind.FD in kinds or EstimatorKind.SCALED_FD in kinds:
        weights["fd"] = delta / batch.sq_norms()
    if EstimatorKind.CENTRAL_SUM in kinds:
        weights["central"] = delta
    if EstimatorKind.ES in kinds:
        weights["es"] = np.asarray(ev.values)
    means = dict(zip(weights, _weighted_means(batch.epsilons, list(weights.values()))))

    def make(kind, vector, r_theta, normalized=False):
        vector.flags.writeable = False
        return GradientEstimate(vector, kind, batch.lam, batch.sigma, batch.seed, r_theta, normalized)

    out = {}
    for kind in kinds:
        if kind is EstimatorKind.FD:
            out[kind] = make(kind, means["fd"].copy(), ev.r_theta)
        elif kind is EstimatorKind.SCALED_FD:
            mu = chi_mean(batch.n, batch.sigma)
            out[kind] = make(kind, mu * mu * means["fd"], ev.r_theta)
        elif kind is EstimatorKind.CENTRAL_SUM:
            out[kind] = make(kind, means["central"].copy(), ev.r_theta)
        else:
            vec = means["es"].copy()
            if normalize_es:
                vec = vec / (batch.sigma * batch.sigma)
            out[kind] = make(kind, vec, None, normalize_es)
    return out


def fd_gradient(batch, objective, *, evaluations=None) -> GradientEstimate:
    """Finite-difference estimate: unit directions times directional difference quotients."""
    return estimate_all(batch, objective, [EstimatorKind.FD], evaluations=evaluations)[EstimatorKind.FD]


def es_gradient(batch, objective, *, evaluations=None, normalize_es=False) -> GradientEstimate:
    """Evolution Strategies estimate ``(1/lam) sum eps_i R(theta + eps_i)``."""
    return estimate_all(
        batch, objective, [EstimatorKind.ES], evaluations=evaluations, normalize_es=normalize_es
    )[EstimatorKind.ES]


def scaled_fd_gradient(batch, objective, *, evaluations=None) -> GradientEstimate:
    """FD times the squared mean perturbation norm, putting it on the ES scale."""
    return estimate_all(
        batch, objective, [EstimatorKind.SCALED_FD], evaluations=evaluations
    )[EstimatorKind.SCALED_FD]


def central_sum(batch, objective, *, evaluations=None) -> GradientEstimate:
    return estimate_all(
        batch, objective, [EstimatorKind.CENTRAL_SUM], evaluations=evaluations
    )[EstimatorKind.CENTRAL_SUM]


def perturbation_mean(batch: PerturbationBatch) -> np.ndarray:
    """(1/lam) sum eps_i with the same reduction as the estimators."""
    return neumaier_sum(batch.epsilons) / batch.lam


def gradient_difference(batch, objective, *, evaluations=None) -> np.ndarray:
    """``central_sum - es_gradient``, returned in its closed form ``-R(theta) mean(eps)``.

    The subtraction of the two estimates is also carried out and compared to
    the closed form coordinate by coordinate, relative to the largest of the
    three magnitudes involved (absolute 1e-14 where all are zero).
    """
    ev = evaluations if evaluations is not None else evaluate_batch(batch, objective)
    if ev.values.shape[0] != batch.lam:
        raise UsageError("evaluations do not belong to this batch")
    # same weights and reduction as estimate_all, plus sum(eps), in one pass
    central, es, eps_mean = _weighted_means(
        batch.epsilons, [ev.values - ev.r_theta, np.asarray(ev.values), np.ones(batch.lam)]
    )
    closed = -ev.r_theta * eps_mean
    subtracted = central - es
    scale = np.maximum.reduce([np.abs(closed), np.abs(central), np.abs(es)])
    err = np.abs(subtracted - closed)
    bad = err > np.maximum(DIFF_RTOL * scale, DIFF_ATOL)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise NumericalConsistencyError(
            f"difference identity fails at coordinate {j}: "
            f"subtracted={subtracted[j]!r}, closed form={closed[j]!r}"
        )
    return closed
