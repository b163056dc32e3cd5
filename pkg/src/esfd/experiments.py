"""Monte Carlo sweeps over dimension, scale and population size.

Each experiment is a pure function of its :class:`SweepPlan`. Every
(grid point, trial) pair gets its own seed, derived by hashing its
coordinates and XOR-ing with the plan's base seed, so trials can run in any
order on any number of threads and still give identical records.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import estimators as est
from .errors import EvaluationError, UsageError
from .objectives import ObjectiveSpec, make_objective
from .reduce import neumaier_sum
from .sampling import SEED_MAX, check_seed, make_rng, mirror_batch, sample_batch
from .specfun import chi_mean, chi_variance, gamma_ratio_exact

K = est.EstimatorKind

SCHEMAS = {
    "norm-concentration": (
        "emp_mean", "emp_var", "exact_mean", "exact_var", "asym_mean",
        "ratio_s_over_mu", "emp_ratio",
    ),
    "difference-scaling": (
        "r_theta", "mean_norm_D", "per_coord_var_D", "predicted_var",
        "predicted_norm", "fit_slope",
    ),
    "dimension-convergence": ("rel_err_scaling", "cosine_es_fd", "cosine_fd_true"),
    "sphere-shell": (
        "emp_ratio_var", "exact_ratio_var", "emp_ratio_var_se", "max_abs_coord_mean",
        "coord_mean_sq_stat", "mean_abs_pairwise_cos", "exact_abs_pairwise_cos",
    ),
    "paired-optimization": (
        "trial", "iteration", "f_es", "f_fd", "traj_dist", "traj_scale",
        "es_failed_at", "fd_failed_at", "normalize_es",
    ),
}


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    n: int
    sigma: float
    lam: int
    trials: int
    seed: int
    metrics: dict

    def __post_init__(self):
        expected = SCHEMAS.get(self.experiment)
        if expected is None:
            raise UsageError(f"unknown experiment {self.experiment!r}")
        if tuple(self.metrics) != expected:
            raise ValueError(
                f"{self.experiment} metrics {tuple(self.metrics)} do not match schema {expected}"
            )


@dataclass(frozen=True)
class ThetaSpec:
    """Where to put theta: the origin, or a seeded uniform point in a ball."""

    kind: str = "ball"
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in ("origin", "ball"):
            raise UsageError(f"theta must be 'origin' or 'ball:R', got {self.kind!r}")
        if self.kind == "ball" and not self.radius > 0:
            raise UsageError(f"ball radius must be positive, got {self.radius!r}")

    @classmethod
    def parse(cls, text: str) -> "ThetaSpec":
        if text == "origin":
            return cls("origin", 0.0)
        if text.startswith("ball:"):
            try:
                return cls("ball", float(text[5:]))
            except ValueError:
                pass
        raise UsageError(f"--theta must be 'origin' or 'ball:R', got {text!r}")

    def __str__(self):
        return "origin" if self.kind == "origin" else f"ball:{self.radius:g}"

    def point(self, n: int, seed: int) -> np.ndarray:
        if self.kind == "origin":
            return np.zeros(n)
        rng = make_rng(seed)
        direction = rng.standard_normal(n)
        direction /= np.sqrt(np.square(direction).sum())
        return self.radius * rng.random() ** (1.0 / n) * direction


@dataclass(frozen=True)
class SweepPlan:
    experiment: str
    dims: Sequence[int]
    sigmas: Sequence[float] = (1.0,)
    lams: Sequence[int] = (100,)
    trials: int = 100
    base_seed: int = 42
    objective: Optional[ObjectiveSpec] = None
    theta: ThetaSpec = field(default_factory=ThetaSpec)
    normalize_es: bool = False
    mirrored: bool = False
    iterations: int = 2000
    step_size: float = 0.05
    checkpoints: int = 10

    def __post_init__(self):
        if self.experiment not in SCHEMAS:
            raise UsageError(f"unknown experiment {self.experiment!r}")
        for name, values, integral in (
            ("dims", self.dims, True), ("sigmas", self.sigmas, False), ("lams", self.lams, True),
        ):
            if len(values) == 0:
                raise UsageError(f"{name} grid is empty")
            for v in values:
                if not v > 0 or (integral and int(v) != v) or not math.isfinite(v):
                    raise UsageError(f"{name} grid values must be positive, got {v!r}")
        for name in ("trials", "iterations", "checkpoints"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise UsageError(f"{name} must be a positive integer, got {v!r}")
        if not self.step_size > 0:
            raise UsageError(f"step size must be positive, got {self.step_size!r}")
        check_seed(self.base_seed)

    def grid(self):
        return itertools.product(self.dims, self.sigmas, self.lams)

    def record(self, n, sigma, lam, metrics) -> ExperimentRecord:
        return ExperimentRecord(
            self.experiment, int(n), float(sigma), int(lam), int(self.trials),
            int(self.base_seed), dict(metrics),
        )


def derive_seed(base_seed: int, *coords) -> int:
    """base_seed XOR a stable 64-bit hash of the grid coordinates."""
    digest = hashlib.blake2b(repr(coords).encode(), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(digest, "little")) & SEED_MAX


def _map(fn: Callable, items: Iterable, threads: Optional[int]) -> list:
    items = list(items)
    workers = (os.cpu_count() or 1) if threads is None else threads
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _require(plan: SweepPlan, name: str):
    if plan.experiment != name:
        raise UsageError(f"plan is for {plan.experiment!r}, not {name!r}")


def _objective_at(plan: SweepPlan, n: int, default: str):
    spec = plan.objective or ObjectiveSpec(default, n)
    return make_objective(spec.with_dim(n))


def _batch(plan, theta, sigma, lam, seed):
    batch = sample_batch(theta, sigma, lam, seed)
    return mirror_batch(batch) if plan.mirrored else batch


def _cosine(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return math.nan
    return float(np.dot(a, b) / (na * nb))


def norm_concentration_experiment(plan: SweepPlan, threads=None) -> list[ExperimentRecord]:
    """Empirical vs exact mean and variance of ||eps|| on each (n, sigma, lam) cell."""
    _require(plan, "norm-concentration")
    records = []
    for n, sigma, lam in plan.grid():
        zero = np.zeros(n)

        def trial(t, n=n, sigma=sigma, lam=lam):
            batch = sample_batch(zero, sigma, lam, derive_seed(plan.base_seed, plan.experiment, n, sigma, lam, t))
            return np.sqrt(batch.sq_norms())

        norms = np.concatenate(_map(trial, range(plan.trials), threads))
        emp_mean = float(np.mean(norms))
        emp_var = float(np.var(norms, ddof=1)) if norms.size > 1 else math.nan
        mu, s2 = chi_mean(n, sigma), chi_variance(n, sigma)
        records.append(plan.record(n, sigma, lam, {
            "emp_mean": emp_mean,
            "emp_var": emp_var,
            "exact_mean": mu,
            "exact_var": s2,
            "asym_mean": math.sqrt(n * sigma * sigma),
            "ratio_s_over_mu": math.sqrt(s2) / mu,
            "emp_ratio": math.sqrt(emp_var) / emp_mean,
        }))
    return records


def _fit_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2 or np.any(y <= 0) or not np.all(np.isfinite(y)):
        return math.nan
    lx, ly = np.log(x), np.log(y)
    lx -= lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))


def difference_scaling_experiment(plan: SweepPlan, threads=None) -> list[ExperimentRecord]:
    """Size of central_sum - es_gradient against population size.

    theta and the objective are fixed per (n, sigma); the lambda grid is swept
    and the log-log slope of the mean ||D|| is written into every row of the
    group.
    """
    _require(plan, "difference-scaling")
    records = []
    for n, sigma in itertools.product(plan.dims, plan.sigmas):
        objective = _objective_at(plan, n, "linear")
        theta = plan.theta.point(n, derive_seed(plan.base_seed, "theta", n))
        r_theta = float(objective.evaluate(theta))
        if r_theta == 0.0:
            raise UsageError(
                "R(theta) = 0 makes the difference identically zero; "
                "move theta off the origin (--theta ball:R) or add an offset"
            )
        rows = []
        for lam in plan.lams:
            def trial(t, lam=lam):
                seed = derive_seed(plan.base_seed, plan.experiment, n, sigma, lam, t)
                batch = _batch(plan, theta, sigma, lam, seed)
                return est.gradient_difference(batch, objective)

            diffs = np.array(_map(trial, range(plan.trials), threads))
            norms = np.sqrt(np.square(diffs).sum(axis=1))
            per_coord = (
                float(np.mean(np.var(diffs, axis=0, ddof=1))) if plan.trials > 1 else math.nan
            )
            rows.append((lam, {
                "r_theta": r_theta,
                "mean_norm_D": float(np.mean(norms)),
                "per_coord_var_D": per_coord,
                "predicted_var": r_theta**2 * sigma**2 / lam,
                "predicted_norm": abs(r_theta) * sigma * math.sqrt(n / lam),
            }))
        slope = _fit_slope([lam for lam, _ in rows], [m["mean_norm_D"] for _, m in rows])
        for lam, metrics in rows:
            records.append(plan.record(n, sigma, lam, {**metrics, "fit_slope": slope}))
    return records


def dimension_convergence_experiment(plan: SweepPlan, threads=None) -> list[ExperimentRecord]:
    """How closely the mu^2-scaled FD matches the central sum as n grows.

    Per trial: relative distance ||scaled_fd - central|| / ||central||, the
    cosine between the ES and FD vectors, and the cosine between FD and the
    analytic gradient. Each record holds the per-cell medians over trials.
    """
    _require(plan, "dimension-convergence")
    records = []
    for n, sigma, lam in plan.grid():
        objective = _objective_at(plan, n, "sphere")
        if objective.name == "constant":
            raise UsageError("a constant objective makes every estimate zero; nothing to compare")
        theta = plan.theta.point(n, derive_seed(plan.base_seed, "theta", n))
        true_grad = (
            objective.analytic_gradient(theta) if objective.analytic_gradient is not None else None
        )

        def trial(t, n=n, sigma=sigma, lam=lam):
            seed = derive_seed(plan.base_seed, plan.experiment, n, sigma, lam, t)
            batch = _batch(plan, theta, sigma, lam, seed)
            e = est.estimate_all(batch, objective, normalize_es=plan.normalize_es)
            central = e[K.CENTRAL_SUM].vector
            denom = np.linalg.norm(central)
            if denom == 0:
                raise UsageError("central sum is exactly zero; relative error undefined")
            rel = float(np.linalg.norm(e[K.SCALED_FD].vector - central) / denom)
            cos_true = _cosine(e[K.FD].vector, true_grad) if true_grad is not None else math.nan
            return rel, _cosine(e[K.ES].vector, e[K.FD].vector), cos_true

        stats = np.array(_map(trial, range(plan.trials), threads))
        med = np.median(stats, axis=0)
        records.append(plan.record(n, sigma, lam, {
            "rel_err_scaling": float(med[0]),
            "cosine_es_fd": float(med[1]),
            "cosine_fd_true": float(med[2]),
        }))
    return records


def expected_abs_cosine(n: int) -> float:
    """E|u.v| for independent uniform unit vectors in R^n."""
    return gamma_ratio_exact(n / 2.0, (n + 1) / 2.0) / math.sqrt(math.pi)


def sphere_shell_experiment(plan: SweepPlan, threads=None) -> list[ExperimentRecord]:
    """Norm and direction statistics of the perturbations.

    ``coord_mean_sq_stat`` is N ||mean(u)||^2 over the N unit directions; it
    has expectation 1 and standard deviation sqrt(2 (N-1) / (N n)) when the
    directions are uniform. Pairwise cosines use disjoint consecutive pairs
    within each batch.
    """
    _require(plan, "sphere-shell")
    records = []
    for n, sigma, lam in plan.grid():
        zero = np.zeros(n)
        mu = chi_mean(n, sigma)

        def trial(t, n=n, sigma=sigma, lam=lam):
            seed = derive_seed(plan.base_seed, plan.experiment, n, sigma, lam, t)
            eps = sample_batch(zero, sigma, lam, seed).epsilons
            norms = np.sqrt(np.square(eps).sum(axis=1))
            units = eps / norms[:, None]
            m = (lam // 2) * 2
            cos = np.abs((units[0:m:2] * units[1:m:2]).sum(axis=1))
            return norms, neumaier_sum(units), cos

        parts = _map(trial, range(plan.trials), threads)
        ratio = np.concatenate([p[0] for p in parts]) / mu
        total = int(ratio.size)
        unit_sum = neumaier_sum(np.array([p[1] for p in parts]))
        cosines = np.concatenate([p[2] for p in parts])
        centred = ratio - ratio.mean()
        var = float(np.var(ratio, ddof=1)) if total > 1 else math.nan
        m4 = float(np.mean(centred**4))
        coord_mean = unit_sum / total
        records.append(plan.record(n, sigma, lam, {
            "emp_ratio_var": var,
            "exact_ratio_var": chi_variance(n, sigma) / mu**2,
            "emp_ratio_var_se": math.sqrt(max(m4 - var * var, 0.0) / total),
            "max_abs_coord_mean": float(np.max(np.abs(coord_mean))),
            "coord_mean_sq_stat": float(total * np.square(coord_mean).sum()),
            "mean_abs_pairwise_cos": float(np.mean(cosines)) if cosines.size else math.nan,
            "exact_abs_pairwise_cos": expected_abs_cosine(n),
        }))
    return records


def _checkpoints(iterations: int, count: int) -> list[int]:
    return sorted({round(k * iterations / count) for k in range(count + 1)})


def paired_optimization_experiment(plan: SweepPlan, threads=None) -> list[ExperimentRecord]:
    """Gradient descent driven by ES and by FD on an identical batch sequence.

    Both runs start at the same theta_0 and use the same seed at every
    iteration, so iteration t perturbs both with the same eps_i (around their
    own current points). FD is put on the ES scale through the squared mean
    norm: the FD step uses chi_mean^2 / sigma^2 * FD when ``normalize_es`` is
    set (and ES is divided by sigma^2), chi_mean^2 * FD otherwise.

    A run whose iterate or objective turns non-finite stops; the iteration is
    kept in ``*_failed_at`` (-1 when it never failed) and later checkpoints
    report NaN for that run.
    """
    _require(plan, "paired-optimization")
    records = []
    marks = _checkpoints(plan.iterations, plan.checkpoints)
    for n, sigma, lam in plan.grid():
        objective = _objective_at(plan, n, "sphere")
        scale = chi_mean(n, sigma) ** 2
        if plan.normalize_es:
            scale /= sigma * sigma

        def trial(t, n=n, sigma=sigma, lam=lam):
            theta0 = plan.theta.point(n, derive_seed(plan.base_seed, "theta", n, t))
            state = {"es": theta0.copy(), "fd": theta0.copy()}
            failed = {"es": -1, "fd": -1}
            rows = []

            def snapshot(it):
                f = {}
                for key in state:
                    f[key] = math.nan if failed[key] >= 0 else objective.evaluate(state[key])
                alive = failed["es"] < 0 and failed["fd"] < 0
                rows.append((it, {
                    "trial": float(t),
                    "iteration": float(it),
                    "f_es": f["es"],
                    "f_fd": f["fd"],
                    "traj_dist": float(np.linalg.norm(state["es"] - state["fd"])) if alive else math.nan,
                    "traj_scale": float(np.linalg.norm(state["es"] - theta0)) if failed["es"] < 0 else math.nan,
                    "es_failed_at": float(failed["es"]),
                    "fd_failed_at": float(failed["fd"]),
                    "normalize_es": float(plan.normalize_es),
                }))

            snapshot(0)
            for it in range(1, plan.iterations + 1):
                seed = derive_seed(plan.base_seed, plan.experiment, n, sigma, lam, t, it)
                for key in state:
                    if failed[key] >= 0:
                        continue
                    batch = _batch(plan, state[key], sigma, lam, seed)
                    try:
                        if key == "es":
                            g = est.es_gradient(batch, objective, normalize_es=plan.normalize_es).vector
                        else:
                            g = scale * est.fd_gradient(batch, objective).vector
                    except EvaluationError:
                        failed[key] = it
                        continue
                    nxt = state[key] - plan.step_size * g
                    if not np.all(np.isfinite(nxt)) or not math.isfinite(objective.evaluate(nxt)):
                        failed[key] = it
                        continue
                    state[key] = nxt
                if it in marks:
                    snapshot(it)
            return rows

        def guarded(t):
            with np.errstate(over="ignore", invalid="ignore"):
                return trial(t)

        for rows in _map(guarded, range(plan.trials), threads):
            for _, metrics in rows:
                records.append(plan.record(n, sigma, lam, metrics))
    return records


EXPERIMENTS = {
    "norm-concentration": norm_concentration_experiment,
    "difference-scaling": difference_scaling_experiment,
    "dimension-convergence": dimension_convergence_experiment,
    "sphere-shell": sphere_shell_experiment,
    "paired-optimization": paired_optimization_experiment,
}


def run_plan(plan: SweepPlan, threads=None) -> list[ExperimentRecord]:
    return EXPERIMENTS[plan.experiment](plan, threads=threads)
