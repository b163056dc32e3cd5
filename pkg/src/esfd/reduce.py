"""Fixed-order compensated summation.

Rows are accumulated in ascending index order with Neumaier's variant of
Kahan summation, each column independently. The numba kernel and the NumPy
fallback perform the same floating-point operations in the same order and
return identical bits.
"""

from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None


def _neumaier_rows_numpy(rows):
    total = np.zeros(rows.shape[1], dtype=np.float64)
    comp = np.zeros_like(total)
    t = np.empty_like(total)
    big = np.empty(total.shape, dtype=bool)
    for x in rows:
        np.add(total, x, out=t)
        np.greater_equal(np.abs(total), np.abs(x), out=big)
        # lost low-order bits of whichever operand was smaller
        comp += np.where(big, (total - t) + x, (x - t) + total)
        total, t = t, total
    return total + comp


def _neumaier_rows_kernel(rows):
    lam, k = rows.shape
    total = np.zeros(k, dtype=np.float64)
    comp = np.zeros(k, dtype=np.float64)
    for i in range(lam):
        for j in range(k):
            x = rows[i, j]
            s = total[j]
            t = s + x
            if abs(s) >= abs(x):
                comp[j] += (s - t) + x
            else:
                comp[j] += (x - t) + s
            total[j] = t
    return total + comp


if numba is not None:
    _neumaier_rows = numba.njit(cache=True, fastmath=False)(_neumaier_rows_kernel)
else:  # pragma: no cover
    _neumaier_rows = _neumaier_rows_numpy


def neumaier_sum(rows: np.ndarray) -> np.ndarray:
    """Sum ``rows`` along axis 0 with compensation; 1-d input gives a scalar."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        return float(neumaier_sum(rows[:, None])[0])
    if rows.ndim != 2:
        raise ValueError(f"expected a 1-d or 2-d array, got shape {rows.shape}")
    if rows.shape[0] == 0:
        return np.zeros(rows.shape[1])
    return _neumaier_rows(np.ascontiguousarray(rows))
