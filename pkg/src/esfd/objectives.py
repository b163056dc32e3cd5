"""Benchmark objectives R: R^n -> R with analytic gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import UsageError
from .sampling import make_rng

FAMILIES = ("constant", "linear", "sphere", "quadratic", "rosenbrock")

# family -> accepted parameters and their defaults
DEFAULT_PARAMS = {
    "constant": {"value": 1.0},
    "linear": {"scale": 1.0, "seed": 0.0, "offset": 0.0},
    "sphere": {},
    "quadratic": {"condition": 10.0},
    "rosenbrock": {},
}


@dataclass(frozen=True)
class Objective:
    """A pure objective. ``evaluate`` must return the same float for the same input."""

    name: str
    dim: int
    evaluate: Callable[[np.ndarray], float]
    analytic_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x) -> float:
        return self.evaluate(x)


@dataclass(frozen=True)
class ObjectiveSpec:
    name: str
    dim: int
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise UsageError(f"unknown objective {self.name!r}; choose from {', '.join(FAMILIES)}")
        if isinstance(self.dim, bool) or int(self.dim) != self.dim or self.dim < 1:
            raise UsageError(f"objective dim must be a positive integer, got {self.dim!r}")
        unknown = set(self.parameters) - set(DEFAULT_PARAMS[self.name])
        if unknown:
            raise UsageError(f"objective {self.name!r} has no parameter(s) {sorted(unknown)}")

    def with_dim(self, dim: int) -> "ObjectiveSpec":
        return ObjectiveSpec(self.name, dim, dict(self.parameters))


def linear_direction(dim: int, seed: int) -> np.ndarray:
    """A uniformly random unit vector in R^dim, fixed by ``seed``."""
    g = make_rng(seed).standard_normal(dim)
    return g / np.sqrt(np.square(g).sum())


def constant(dim: int, value: float = 1.0) -> Objective:
    value = float(value)
    zero = np.zeros(dim)
    return Objective("constant", dim, lambda x: value, lambda x: zero.copy())


def linear(coefficients, offset: float = 0.0) -> Objective:
    """``R(x) = g.x + offset``."""
    g = np.array(coefficients, dtype=np.float64)
    g.flags.writeable = False
    offset = float(offset)

    def f(x):
        return float(np.dot(g, x)) + offset

    return Objective("linear", g.shape[0], f, lambda x: g.copy())


def sphere(dim: int) -> Objective:
    def f(x):
        x = np.asarray(x, dtype=np.float64)
        return float(np.dot(x, x))

    return Objective("sphere", dim, f, lambda x: 2.0 * np.asarray(x, dtype=np.float64))


def quadratic(dim: int, condition: float = 10.0) -> Objective:
    """``x^T A x`` with diagonal A log-spaced from 1 to ``condition``."""
    if not condition >= 1:
        raise UsageError(f"condition number must be >= 1, got {condition!r}")
    if dim == 1:
        diag = np.ones(1)
    else:
        diag = condition ** (np.arange(dim) / (dim - 1))

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        return float(np.dot(diag * x, x))

    return Objective("quadratic", dim, f, lambda x: 2.0 * diag * np.asarray(x, dtype=np.float64))


def rosenbrock(dim: int) -> Objective:
    """Chained Rosenbrock, sum of 100 (x[i+1] - x[i]^2)^2 + (1 - x[i])^2."""
    if dim < 2:
        raise UsageError("rosenbrock needs dim >= 2")

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        head, tail = x[:-1], x[1:]
        return float(np.sum(100.0 * (tail - head**2) ** 2 + (1.0 - head) ** 2))

    def grad(x):
        x = np.asarray(x, dtype=np.float64)
        head, tail = x[:-1], x[1:]
        inner = tail - head**2
        g = np.zeros_like(x)
        g[:-1] = -400.0 * head * inner - 2.0 * (1.0 - head)
        g[1:] += 200.0 * inner
        return g

    return Objective("rosenbrock", dim, f, grad)


def make_objective(spec: ObjectiveSpec) -> Objective:
    params = {**DEFAULT_PARAMS[spec.name], **spec.parameters}
    dim = int(spec.dim)
    if spec.name == "constant":
        return constant(dim, params["value"])
    if spec.name == "linear":
        seed = params["seed"]
        if seed != int(seed) or seed < 0:
            raise UsageError(f"linear seed must be a non-negative integer, got {seed!r}")
        g = params["scale"] * linear_direction(dim, int(seed))
        return linear(g, params["offset"])
    if spec.name == "sphere":
        return sphere(dim)
    if spec.name == "quadratic":
        return quadratic(dim, params["condition"])
    return rosenbrock(dim)


def check_gradient(objective: Objective, point, step: float) -> float:
    """Max over coordinates of |central difference - analytic gradient|."""
    if objective.analytic_gradient is None:
        raise UsageError(f"objective {objective.name!r} has no analytic gradient")
    if not step > 0:
        raise UsageError(f"step must be positive, got {step!r}")
    x = np.array(point, dtype=np.float64)
    analytic = np.asarray(objective.analytic_gradient(x))
    err = 0.0
    for j in range(x.shape[0]):
        up = x.copy()
        down = x.copy()
        up[j] += step
        down[j] -= step
        numeric = (objective.evaluate(up) - objective.evaluate(down)) / (up[j] - down[j])
        err = max(err, abs(numeric - analytic[j]))
    return err if math.isfinite(err) else math.inf
