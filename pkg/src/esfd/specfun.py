"""Gamma-function ratios and moments of the scaled chi distribution.

The norm of an ``N(0, sigma^2 I_n)`` draw follows ``sigma * chi(n)``. Its mean
and variance are ratios of Gamma functions at half-integer arguments, and
Gamma itself overflows doubles near n = 340, so everything here works with
differences of log-Gamma values.

``math.lgamma(x) - math.lgamma(y)`` is not good enough for large arguments:
both terms are ~x log x and the difference loses about log10(x log x) digits,
which is fatal for the variance (a difference of two ~n/2 quantities). The
log-ratio is instead formed from a shifted Stirling series in which the
leading terms are combined analytically through ``log1p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

# B_{2k} / (2k (2k - 1)) for k = 1..6
_STIRLING_COEFFS = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
)
# With arguments >= 20 the first omitted term is below 1e-19.
_STIRLING_MIN_ARG = 20.0


def _stirling_tail(x: float) -> float:
    inv = 1.0 / x
    inv2 = inv * inv
    acc = 0.0
    power = inv
    for c in _STIRLING_COEFFS:
        acc += c * power
        power *= inv2
    return acc


def _check_positive(name, value):
    if not value > 0 or not math.isfinite(value):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


def _log_quotient(x, y):
    """log(x / y), via log1p only when x / y is near 1."""
    q = x / y
    if 0.5 < q < 2.0:
        return math.log1p((x - y) / y)
    return math.log(q)


def _shift_up(x, y):
    """Apply Gamma(t + 1) = t Gamma(t) until both arguments reach the Stirling range.

    Returns the shifted pair and the accumulated log correction, so that
    lgamma(x) - lgamma(y) == lgamma(x') - lgamma(y') + correction.
    """
    correction = 0.0
    while min(x, y) < _STIRLING_MIN_ARG:
        correction -= _log_quotient(x, y)
        x += 1.0
        y += 1.0
    return x, y, correction


def log_gamma_ratio(x: float, y: float) -> float:
    """Return ``log(Gamma(x) / Gamma(y))`` for ``x, y > 0``."""
    _check_positive("x", x)
    _check_positive("y", y)
    if x == y:
        return 0.0
    x, y, acc = _shift_up(x, y)
    d = x - y
    acc += (y - 0.5) * _log_quotient(x, y) + d * math.log(x) - d
    return acc + (_stirling_tail(x) - _stirling_tail(y))


def _log1p_minus_x_over_x(t: float) -> float:
    """``(log1p(t) - t) / t`` without cancellation for small ``t``."""
    if abs(t) > 0.1:
        return (math.log1p(t) - t) / t
    acc = 0.0
    power = t
    k = 2
    while True:
        term = power / k
        acc += -term if k % 2 == 0 else term
        if abs(term) < 1e-18 * abs(acc):
            return acc
        power *= t
        k += 1


def _log_ratio_excess(z: float, a: float) -> float:
    """``log(Gamma(z + a) / Gamma(z)) - a log z``, small for large ``z``.

    Kept separate from :func:`log_gamma_ratio` so the O(1/z) remainder is not
    computed as the difference of two O(log z) numbers.
    """
    if z < _STIRLING_MIN_ARG:
        return log_gamma_ratio(z + a, z) - a * math.log(z)
    t = a / z
    # (z - 1/2 + a) log1p(t) - a, regrouped so nothing O(1) cancels
    head = (a - 0.5) * math.log1p(t) + a * _log1p_minus_x_over_x(t)
    return head + (_stirling_tail(z + a) - _stirling_tail(z))


def gamma_ratio_exact(numerator_arg: float, denominator_arg: float) -> float:
    """Gamma(numerator_arg) / Gamma(denominator_arg) without overflowing Gamma.

    Raises :class:`DomainError` for non-positive arguments and
    ``OverflowError`` if the ratio itself does not fit in a double.
    """
    log_ratio = log_gamma_ratio(numerator_arg, denominator_arg)
    try:
        return math.exp(log_ratio)
    except OverflowError:
        raise OverflowError(
            f"Gamma({numerator_arg})/Gamma({denominator_arg}) exceeds double range"
        ) from None


def gamma_ratio_asymptotic(z: float, a: float, b: float) -> float:
    """First-order large-``z`` expansion of Gamma(z + a) / Gamma(z + b).

    ``z**(a - b) * (1 + (a - b)(a + b - 1) / (2 z))``; the dropped remainder is
    O(z**-2) relative.
    """
    _check_positive("z", z)
    bracket = 1.0 + (a - b) * (a + b - 1.0) / (2.0 * z)
    if bracket <= 0:
        raise DomainError(f"z={z!r} is too small for the expansion with a={a!r}, b={b!r}")
    return z ** (a - b) * bracket


def _check_dim(n):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n!r}")
    return int(n)


def chi_mean(n: int, sigma: float = 1.0) -> float:
    """Mean of ``||N(0, sigma^2 I_n)||``: sigma sqrt(2) Gamma((n+1)/2) / Gamma(n/2)."""
    n = _check_dim(n)
    _check_positive("sigma", sigma)
    return sigma * math.sqrt(2.0) * gamma_ratio_exact((n + 1) / 2.0, n / 2.0)


def chi_variance(n: int, sigma: float = 1.0) -> float:
    """Variance of ``||N(0, sigma^2 I_n)||``.

    Evaluates 2 sigma^2 (Gamma(z+1)/Gamma(z) - (Gamma(z+1/2)/Gamma(z))^2) with
    z = n/2. Written as ``2 sigma^2 A (-expm1(2 log r - log A))`` where ``A``
    and ``r`` are the two ratios, with the log z parts cancelled analytically;
    the direct subtraction loses about half the digits at n = 1e6.
    """
    n = _check_dim(n)
    _check_positive("sigma", sigma)
    z = n / 2.0
    excess_one = _log_ratio_excess(z, 1.0)
    excess_half = _log_ratio_excess(z, 0.5)
    big_ratio = z * math.exp(excess_one)
    return 2.0 * sigma * sigma * big_ratio * -math.expm1(2.0 * excess_half - excess_one)


@dataclass(frozen=True)
class ChiStats:
    n: int
    sigma: float
    mean: float
    variance: float
    mean_asymptotic: float
    variance_limit: float

    @property
    def cv(self) -> float:
        """Coefficient of variation s / mu."""
        return math.sqrt(self.variance) / self.mean


def chi_stats(n: int, sigma: float = 1.0) -> ChiStats:
    return ChiStats(
        n=_check_dim(n),
        sigma=sigma,
        mean=chi_mean(n, sigma),
        variance=chi_variance(n, sigma),
        mean_asymptotic=math.sqrt(n * sigma * sigma),
        variance_limit=sigma * sigma / 2.0,
    )
