"""Seeded Gaussian perturbation batches.

Perturbations are drawn with NumPy's ziggurat normal sampler on a Philox4x64
counter-based stream keyed by the 64-bit seed. The same (n, sigma, lam, seed)
always produces the same bits on a given NumPy version.

Batches store the offsets ``eps_i = alpha_i - theta`` rather than the points
themselves, since every estimator consumes the offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

SEED_MAX = 2**64 - 1
NORM_FLOOR_FACTOR = 1e-12


def as_param_vector(values) -> np.ndarray:
    """Validate and copy a parameter vector (1-d, non-empty, finite)."""
    theta = np.array(values, dtype=np.float64)
    if theta.ndim != 1 or theta.size < 1:
        raise UsageError(f"parameter vector must be 1-d and non-empty, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise UsageError("parameter vector has non-finite entries")
    theta.flags.writeable = False
    return theta


def check_seed(seed) -> int:
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= seed <= SEED_MAX:
        raise UsageError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(check_seed(seed)))


def norm_floor(n: int, sigma: float) -> float:
    return NORM_FLOOR_FACTOR * sigma * math.sqrt(n)


@dataclass(frozen=True, eq=False)
class PerturbationBatch:
    """Centre ``theta``, scale ``sigma`` and ``lam`` perturbation rows ``epsilons``."""

    theta: np.ndarray
    sigma: float
    epsilons: np.ndarray
    seed: int
    resamples: int = 0
    mirrored: bool = False

    def __post_init__(self):
        eps = np.array(self.epsilons, dtype=np.float64)
        if eps.ndim != 2 or eps.shape[0] < 1 or eps.shape[1] != self.theta.shape[0]:
            raise UsageError(
                f"epsilons must have shape (lam, {self.theta.shape[0]}), got {eps.shape}"
            )
        if not np.all(np.isfinite(eps)):
            raise UsageError("perturbations must be finite")
        eps.flags.writeable = False
        object.__setattr__(self, "epsilons", eps)

    @property
    def lam(self) -> int:
        return self.epsilons.shape[0]

    @property
    def n(self) -> int:
        return self.epsilons.shape[1]

    def alphas(self) -> np.ndarray:
        """The sampled points ``theta + eps_i``, one per row."""
        return self.theta + self.epsilons

    def sq_norms(self) -> np.ndarray:
        return np.square(self.epsilons).sum(axis=1)


def sample_batch(theta, sigma: float, lam: int, seed: int) -> PerturbationBatch:
    """Draw ``lam`` i.i.d. perturbations from N(0, sigma^2 I_n) around ``theta``.

    A row whose norm does not exceed ``1e-12 * sigma * sqrt(n)`` is redrawn from
    the same stream; the count of redraws is kept on the batch.
    """
    theta = as_param_vector(theta)
    if not sigma > 0 or not math.isfinite(sigma):
        raise UsageError(f"sigma must be positive, got {sigma!r}")
    if isinstance(lam, bool) or int(lam) != lam or lam < 1:
        raise UsageError(f"lambda must be a positive integer, got {lam!r}")
    rng = make_rng(seed)
    n = theta.shape[0]
    eps = rng.standard_normal((int(lam), n))
    eps *= sigma
    floor = norm_floor(n, sigma)
    resamples = 0
    short = np.flatnonzero(~(np.sqrt(np.square(eps).sum(axis=1)) > floor))
    for i in short:
        while not np.sqrt(np.square(eps[i]).sum()) > floor:
            eps[i] = sigma * rng.standard_normal(n)
            resamples += 1
    return PerturbationBatch(theta, float(sigma), eps, check_seed(seed), resamples)


def mirror_batch(batch: PerturbationBatch) -> PerturbationBatch:
    """Return the antithetic batch ``eps_1, -eps_1, eps_2, -eps_2, ...``.

    Pairs are interleaved so a left-to-right sum returns to exactly zero after
    every pair.
    """
    lam, n = batch.epsilons.shape
    eps = np.empty((2 * lam, n))
    eps[0::2] = batch.epsilons
    eps[1::2] = -batch.epsilons
    return PerturbationBatch(
        batch.theta, batch.sigma, eps, batch.seed, batch.resamples, mirrored=True
    )
