"""Risk evaluation for arbitrary portfolios.

Two routes compute the same conditional value-at-risk and must agree:

* the bivariate route, from the distribution of (portfolio, conditioning
  asset): ``-mu_X + sigma_X * (rho * a + b * sqrt(1 - rho^2))``;
* the reduced route, directly in weight space:
  ``-x'mu + a x'q + b sqrt(x'Qx)``.

``covar_portfolio`` evaluates both and raises NumericalBreakdown if they
drift apart, which in practice only happens on corrupted inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalBreakdown
from .model import ValidatedModel, _as_weights
from .reduction import ReducedModel

ROUTE_RTOL = 1e-9
RHO_TOL = 1e-12
# Below this the quadratic term is treated as exactly zero: the square root is
# still well defined there even though its gradient is not, and the all-in-one
# conditioning-asset portfolio is a legitimate input.
QUAD_FLOOR = 1e-24
WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class PortfolioReport:
    """Per-portfolio risk summary."""

    E: float
    sigma: float
    var_alpha: float
    rho: float
    covar: float


def covar_bivariate(mu_x: float, sigma_x: float, rho: float, a: float, b: float) -> float:
    """Conditional value-at-risk from bivariate-normal marginal quantities.

    For |rho| = 1 the conditional distribution collapses to a point and the
    expression degrades continuously to ``-mu_x +/- a * sigma_x``.
    """
    if not (a > 0.0 and b > 0.0):
        raise DomainError("stress intensities a and b must be positive")
    if sigma_x < 0.0:
        raise DomainError(f"sigma must be non-negative, got {sigma_x!r}")
    if abs(rho) > 1.0 + RHO_TOL:
        raise DomainError(f"correlation out of range: {rho!r}")
    rho = min(1.0, max(-1.0, rho))
    return -mu_x + sigma_x * (rho * a + b * math.sqrt(max(0.0, 1.0 - rho * rho)))


def _raw_value(m: ValidatedModel, r: ReducedModel, x_int: np.ndarray) -> float:
    quad = float(x_int @ r.Q @ x_int)
    root = 0.0 if quad < QUAD_FLOOR else math.sqrt(quad)
    return float(-(x_int @ m.mu) + m.risk.a * (x_int @ r.q) + m.risk.b * root)


def covar_raw(m: ValidatedModel, r: ReducedModel, x) -> float:
    """The objective as a function on all of R^n, no budget constraint.

    Positively homogeneous of degree one and convex; exposed so those
    properties can be exercised away from the feasible hyperplane.
    """
    w = _as_weights(m, x)
    return _raw_value(m, r, m.to_internal(w))


def covar_portfolio(m: ValidatedModel, r: ReducedModel, x) -> PortfolioReport:
    """Full risk report for a budget-feasible portfolio, cross-checked.

    The reduced-route value is returned; the bivariate route is evaluated as
    well and the two must match to ROUTE_RTOL (relative).
    """
    w = _as_weights(m, x)
    total = float(w.sum())
    if abs(total - 1.0) > WEIGHT_SUM_TOL * max(1.0, abs(total)):
        raise DomainError(f"portfolio weights sum to {total!r}, expected 1")
    xi = m.to_internal(w)

    a, b = m.risk.a, m.risk.b
    expected = float(xi @ m.mu)
    sigma2 = float(xi @ m.sigma @ xi)
    sigma = math.sqrt(max(0.0, sigma2))
    xq = float(xi @ r.q)

    quad = float(xi @ r.Q @ xi)
    root = 0.0 if quad < QUAD_FLOOR else math.sqrt(quad)
    value = -expected + a * xq + b * root

    rho = xq / sigma
    if abs(rho) > 1.0 + RHO_TOL:
        raise DomainError(f"correlation out of range: {rho!r}")
    rho = min(1.0, max(-1.0, rho))
    # Bivariate route, with the complement 1 - rho^2 taken from the projected
    # quadratic (quad = sigma^2 (1 - rho^2)); forming sigma^2 - (x'q)^2 instead
    # would cancel catastrophically near |rho| = 1.
    complement = min(1.0, max(0.0, quad / sigma2)) if quad >= QUAD_FLOOR else 0.0
    other = -expected + sigma * (rho * a + b * math.sqrt(complement))
    if abs(other - value) > ROUTE_RTOL * max(1.0, abs(value)):
        raise NumericalBreakdown(
            f"risk evaluation routes disagree: {value!r} vs {other!r}")

    return PortfolioReport(E=expected, sigma=sigma, var_alpha=-expected + a * sigma,
                           rho=rho, covar=value)


def sigma_and_var(m: ValidatedModel, x) -> tuple[float, float]:
    """Volatility and plain value-at-risk ``-x'mu + a sigma(x)``."""
    w = _as_weights(m, x)
    xi = m.to_internal(w)
    sigma = math.sqrt(max(0.0, float(xi @ m.sigma @ xi)))
    return sigma, float(-(xi @ m.mu) + m.risk.a * sigma)


__all__ = ["PortfolioReport", "covar_bivariate", "covar_portfolio",
           "covar_raw", "sigma_and_var"]
