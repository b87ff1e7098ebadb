"""Dense Cholesky helpers for small symmetric positive definite systems.

Target size is n <= 100, so plain row loops over vectorized numpy slices are
fast enough and keep the pivot test explicit: a factorization is accepted only
if every pivot stays above ``tol_scale * max(diag)``.  That makes "positive
definite" a deterministic, reproducible predicate with no eigensolver involved.
"""

from __future__ import annotations

import numpy as np


class PivotFailure(ValueError):
    """Internal: a Cholesky pivot fell below the relative floor."""


def cholesky_spd(a: np.ndarray, tol_scale: float = 1e-10) -> np.ndarray:
    """Lower Cholesky factor of a symmetric matrix with a relative pivot floor.

    Raises PivotFailure when any pivot (before the square root) is not larger
    than ``tol_scale * max(diag(a))``.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    diag_max = float(np.max(np.diag(a))) if n else 0.0
    if diag_max <= 0.0:
        raise PivotFailure("no positive diagonal entry")
    tol = tol_scale * diag_max
    low = np.zeros((n, n))
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if pivot <= tol:
            raise PivotFailure(f"pivot {pivot:.3e} at column {j} below floor {tol:.3e}")
        low[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def solve_cholesky(low: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(L L^T) x = rhs`` given the lower factor ``L``."""
    n = low.shape[0]
    y = np.empty(n)
    for i in range(n):
        y[i] = (rhs[i] - low[i, :i] @ y[:i]) / low[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - low[i + 1:, i] @ x[i + 1:]) / low[i, i]
    return x


def spd_solve(a: np.ndarray, rhs: np.ndarray, tol_scale: float = 1e-10) -> np.ndarray:
    """Factor-and-solve convenience for a single right-hand side."""
    return solve_cholesky(cholesky_spd(a, tol_scale), np.asarray(rhs, dtype=float))
