"""Domain types, input validation and the canonical internal representation.

A market is described by asset return means ``mu``, a positive definite
covariance ``sigma`` and one distinguished *conditioning asset* whose stress
event defines the conditional risk measure.  Validation permutes the assets so
the conditioning asset always sits at internal position 0; every public result
is mapped back to the caller's ordering, so the permutation never leaks.

Stress intensities are the positive scalars ``a`` and ``b``.  They may be given
directly or derived from quantile levels ``alpha, beta`` in (0, 1/2) via
``a = -quantile(alpha)``, ``b = -quantile(beta)`` of the standard normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadQuantileLevel,
    DimensionMismatch,
    DomainError,
    MuParallelToOnes,
    NotPositiveDefinite,
)
from .linalg import PivotFailure, cholesky_spd

SYMMETRY_RTOL = 1e-12
PD_PIVOT_SCALE = 1e-10
WEIGHT_SUM_TOL = 1e-12

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Acklam's rational minimax coefficients for the inverse standard normal CDF.
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01,
          2.445134137142996e+00, 3.754408661907416e+00)
_ACK_SPLIT = 0.02425


def standard_normal_cdf(z: float) -> float:
    """CDF of N(0, 1), accurate in both tails through erfc."""
    return 0.5 * math.erfc(-z / _SQRT2)


def standard_normal_pdf(z: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def normal_quantile(p: float) -> float:
    """Inverse CDF of the standard normal distribution.

    Rational initial guess (Acklam) followed by two Newton corrections against
    the erfc-based CDF; absolute error is well below 1e-10 across (0, 1).
    """
    if not (isinstance(p, (int, float)) and math.isfinite(p) and 0.0 < p < 1.0):
        raise DomainError(f"quantile level must lie strictly in (0, 1), got {p!r}")
    p = float(p)
    if p == 0.5:
        return 0.0
    if p < _ACK_SPLIT:
        u = math.sqrt(-2.0 * math.log(p))
        z = ((((( _ACK_C[0] * u + _ACK_C[1]) * u + _ACK_C[2]) * u + _ACK_C[3]) * u
              + _ACK_C[4]) * u + _ACK_C[5]) / \
            ((((_ACK_D[0] * u + _ACK_D[1]) * u + _ACK_D[2]) * u + _ACK_D[3]) * u + 1.0)
    elif p > 1.0 - _ACK_SPLIT:
        u = math.sqrt(-2.0 * math.log(1.0 - p))
        z = -(((((_ACK_C[0] * u + _ACK_C[1]) * u + _ACK_C[2]) * u + _ACK_C[3]) * u
               + _ACK_C[4]) * u + _ACK_C[5]) / \
            ((((_ACK_D[0] * u + _ACK_D[1]) * u + _ACK_D[2]) * u + _ACK_D[3]) * u + 1.0)
    else:
        u = p - 0.5
        r = u * u
        z = (((((_ACK_A[0] * r + _ACK_A[1]) * r + _ACK_A[2]) * r + _ACK_A[3]) * r
              + _ACK_A[4]) * r + _ACK_A[5]) * u / \
            (((((_ACK_B[0] * r + _ACK_B[1]) * r + _ACK_B[2]) * r + _ACK_B[3]) * r
              + _ACK_B[4]) * r + 1.0)
    for _ in range(2):
        pdf = standard_normal_pdf(z)
        if pdf <= 0.0:
            break
        z -= (standard_normal_cdf(z) - p) / pdf
    return z


@dataclass(frozen=True)
class RiskParams:
    """Positive stress intensities, optionally tagged with origin levels."""

    a: float
    b: float
    alpha: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise BadQuantileLevel(f"stress intensity a must be positive, got {self.a!r}")
        if not (math.isfinite(self.b) and self.b > 0.0):
            raise BadQuantileLevel(f"stress intensity b must be positive, got {self.b!r}")

    @classmethod
    def from_levels(cls, alpha: float, beta: float) -> "RiskParams":
        for name, level in (("alpha", alpha), ("beta", beta)):
            if not (isinstance(level, (int, float)) and 0.0 < level < 0.5):
                raise BadQuantileLevel(f"{name} must lie in (0, 1/2), got {level!r}")
        return cls(a=-normal_quantile(alpha), b=-normal_quantile(beta),
                   alpha=float(alpha), beta=float(beta))

    @property
    def beta_level(self) -> float:
        """Quantile level implied by b (used by the Monte-Carlo estimator)."""
        return self.beta if self.beta is not None else standard_normal_cdf(-self.b)


@dataclass(frozen=True)
class MarketModel:
    """Raw user input before validation.  ``conditioning_asset`` is 1-based."""

    mu: np.ndarray
    sigma: np.ndarray
    conditioning_asset: int
    risk: RiskParams

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))


@dataclass(frozen=True)
class Portfolio:
    """Weight vector over the assets, summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise DimensionMismatch("portfolio weights must be a vector")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL * max(1.0, abs(total)):
            raise DomainError(f"portfolio weights sum to {total!r}, expected 1")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class ValidatedModel:
    """Canonical model: conditioning asset permuted to internal position 0.

    ``perm`` maps internal slot i to the original asset index ``perm[i]``;
    ``to_internal`` / ``to_original`` translate weight vectors both ways.
    """

    mu: np.ndarray
    sigma: np.ndarray
    risk: RiskParams
    perm: np.ndarray
    inv_perm: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("mu", "sigma", "perm", "inv_perm"):
            arr = getattr(self, name)
            arr = np.asarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def mu1(self) -> float:
        """Expected return of the conditioning asset."""
        return float(self.mu[0])

    @property
    def sigma1(self) -> float:
        """Standard deviation of the conditioning asset."""
        return float(np.sqrt(self.sigma[0, 0]))

    def to_internal(self, weights: np.ndarray) -> np.ndarray:
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.n,):
            raise DimensionMismatch(f"expected weight vector of length {self.n}")
        return w[self.perm]

    def to_original(self, weights: np.ndarray) -> np.ndarray:
        w = np.asarray(weights, dtype=float)
        return w[self.inv_perm]


def _as_weights(model: ValidatedModel, x) -> np.ndarray:
    if isinstance(x, Portfolio):
        x = x.weights
    w = np.asarray(x, dtype=float)
    if w.shape != (model.n,):
        raise DimensionMismatch(f"expected weight vector of length {model.n}")
    return w


def validate_model(m: MarketModel) -> ValidatedModel:
    """Check every invariant and return the canonical permuted model.

    Raises DimensionMismatch, NotPositiveDefinite, MuParallelToOnes or
    BadQuantileLevel (the latter surfaces from RiskParams construction).
    """
    mu = np.asarray(m.mu, dtype=float)
    sigma = np.asarray(m.sigma, dtype=float)
    if mu.ndim != 1 or mu.shape[0] < 2:
        raise DimensionMismatch("mu must be a vector of at least two assets")
    n = mu.shape[0]
    if sigma.shape != (n, n):
        raise DimensionMismatch(f"sigma must be {n}x{n}, got {sigma.shape}")
    if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(sigma)):
        raise DimensionMismatch("mu and sigma must be finite")
    if not (isinstance(m.conditioning_asset, (int, np.integer))
            and 1 <= m.conditioning_asset <= n):
        raise DimensionMismatch(
            f"conditioning_asset must be in 1..{n}, got {m.conditioning_asset!r}")

    scale = float(np.max(np.abs(sigma)))
    if np.max(np.abs(sigma - sigma.T)) > SYMMETRY_RTOL * max(1.0, scale):
        raise NotPositiveDefinite("covariance matrix is not symmetric at tolerance")
    sigma = 0.5 * (sigma + sigma.T)

    mu_span = float(np.max(mu) - np.min(mu))
    if mu_span <= 1e-12 * max(1.0, float(np.max(np.abs(mu)))):
        raise MuParallelToOnes("every asset has the same expected return")

    cond = int(m.conditioning_asset) - 1
    perm = np.concatenate(([cond], np.delete(np.arange(n), cond)))
    inv_perm = np.argsort(perm)
    mu_p = mu[perm]
    sigma_p = sigma[np.ix_(perm, perm)]

    try:
        cholesky_spd(sigma_p, PD_PIVOT_SCALE)
    except PivotFailure as exc:
        raise NotPositiveDefinite(f"covariance matrix failed Cholesky: {exc}") from exc

    return ValidatedModel(mu=mu_p, sigma=sigma_p, risk=m.risk,
                          perm=perm, inv_perm=inv_perm)
