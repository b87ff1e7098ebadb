"""Closed-form critical set, solvability diagnosis and efficiency classes.

For a target return E write ``E_hat = E - mu1``.  When the ones vector, mu and
q are linearly independent, the equality-constrained minimization of the
conditional risk measure reduces to a one-dimensional convex problem of the
form ``F(t) = s t + sqrt((t - p)^2 + q)`` (see ``lemma_minimize``), and the
sign of ``Delta = b^2 alpha_C - a^2 detG`` separates three regimes:

* ``Delta > 0``   unique minimizer per target return,
      x_hat(E_hat) = E_hat/alpha_C Qhat^-1 mu_hat
                   + |E_hat| a/(alpha_C sqrt(Delta)) Qhat^-1 (beta_C mu_hat - alpha_C q_hat)
  with optimal value
      -mu1 + a sigma1 + E_hat (a beta_C/alpha_C - 1) + |E_hat|/alpha_C sqrt(Delta);
* ``Delta = 0``   a finite infimum that is approached but never attained;
* ``Delta < 0``   the objective is unbounded below on the feasible affine set.

In the degenerate regimes the solver returns an explicit feasible ray along
which the objective decreases (to the infimum, or without bound), so the
diagnosis can be verified by direct evaluation.  When the independence
assumption fails, the critical set coincides with the classical
minimum-variance one and the solver falls back to the Merton formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, NumericalBreakdown, PreconditionViolated
from .linalg import cholesky_spd, solve_cholesky
from .model import ValidatedModel
from .reduction import ReducedModel
from .riskmeasures import covar_portfolio

DELTA_RTOL = 1e-12
CHECK_RTOL = 1e-9
CONSTRAINT_TOL = 1e-10


class SolveStatus(str, Enum):
    UNIQUE = "Unique"
    UNBOUNDED_BELOW = "UnboundedBelow"
    INFIMUM_NOT_ATTAINED = "InfimumNotAttained"
    MARKOWITZ_FALLBACK = "MarkowitzFallback"


class EfficiencyClass(str, Enum):
    NONE_EFFICIENT = "NoneEfficient"
    NON_NEGATIVE_E_HAT = "NonNegativeEHalf"
    ALL_EFFICIENT = "AllEfficient"


@dataclass(frozen=True)
class LemmaParams:
    """Parameters of ``F(t) = s*t + sqrt((t - p)^2 + q_lem)``, q_lem > 0."""

    s: float
    p: float
    q_lem: float

    def __post_init__(self):
        if self.s < 0.0:
            raise DomainError(f"slope s must be non-negative, got {self.s!r}")
        if not self.q_lem > 0.0:
            raise DomainError(f"q_lem must be positive, got {self.q_lem!r}")


@dataclass(frozen=True)
class LemmaOutcome:
    """kind is 'min' (value attained at argmin), 'infimum' (limit value, never
    attained) or 'unbounded' (value is -inf)."""

    kind: str
    value: float
    argmin: float | None = None


def lemma_minimize(params: LemmaParams) -> LemmaOutcome:
    """Global minimization of the convex scalar function F.

    s < 1: minimum ``p s + sqrt(q (1 - s^2))`` at ``t = p - s sqrt(q/(1-s^2))``.
    s = 1: no minimum, F decreases to the limit p as t -> -inf.
    s > 1: unbounded below.
    """
    s, p, q = params.s, params.p, params.q_lem
    if s < 1.0:
        one_ms2 = 1.0 - s * s
        return LemmaOutcome(kind="min",
                            value=p * s + math.sqrt(q * one_ms2),
                            argmin=p - s * math.sqrt(q / one_ms2))
    if s == 1.0:
        return LemmaOutcome(kind="infimum", value=p)
    return LemmaOutcome(kind="unbounded", value=-math.inf)


@dataclass(frozen=True)
class CriticalSolution:
    """Outcome of one equality-constrained solve at target return E.

    ``x`` is in the caller's asset order and present only when a minimizer
    exists.  In the degenerate regimes ``ray_base + tau * ray_direction`` is
    feasible for every tau >= 0 and the objective decreases along it; the pair
    is also populated for the infimum regime as a witness sequence.
    ``t_hat, lambda1, lambda2`` are solver internals kept for diagnostics.
    """

    E_hat: float
    x: np.ndarray | None
    value: float
    status: SolveStatus
    efficiency_class: EfficiencyClass | None
    ray_base: np.ndarray | None = None
    ray_direction: np.ndarray | None = None
    t_hat: float | None = field(default=None, repr=False)
    lambda1: float | None = field(default=None, repr=False)
    lambda2: float | None = field(default=None, repr=False)


def _delta_regime(r: ReducedModel) -> int:
    """+1 unique, 0 infimum, -1 unbounded, judged at relative tolerance."""
    scale = max(r.b * r.b * r.alpha_C, r.a * r.a * abs(r.detG), 1e-300)
    if r.Delta > DELTA_RTOL * scale:
        return 1
    if r.Delta < -DELTA_RTOL * scale:
        return -1
    return 0


def solvability_status(r: ReducedModel) -> SolveStatus:
    """Regime a per-target solve of this model will report."""
    if not r.independent:
        return SolveStatus.MARKOWITZ_FALLBACK
    regime = _delta_regime(r)
    if regime == 1:
        return SolveStatus.UNIQUE
    if regime == 0:
        return SolveStatus.INFIMUM_NOT_ATTAINED
    return SolveStatus.UNBOUNDED_BELOW


def classify_efficiency(r: ReducedModel) -> EfficiencyClass:
    """Efficiency regime for Delta > 0, decided by a*beta_C - alpha_C vs ±sqrt(Delta).

    Boundary ties resolve exactly as stated: the lower boundary belongs to the
    no-efficient-portfolio class, the upper one to the E_hat >= 0 class.
    """
    if _delta_regime(r) != 1:
        raise PreconditionViolated(
            f"efficiency classes are defined only for Delta > 0, got {r.Delta!r}")
    t = r.a * r.beta_C - r.alpha_C
    root = math.sqrt(r.Delta)
    if t <= -root:
        return EfficiencyClass.NONE_EFFICIENT
    if t <= root:
        return EfficiencyClass.NON_NEGATIVE_E_HAT
    return EfficiencyClass.ALL_EFFICIENT


def merton_scalars(m: ValidatedModel) -> tuple[float, float, float]:
    """The classical scalars mu'S^-1 mu, mu'S^-1 1, 1'S^-1 1."""
    low = cholesky_spd(m.sigma)
    si_mu = solve_cholesky(low, m.mu)
    si_one = solve_cholesky(low, np.ones(m.n))
    return float(m.mu @ si_mu), float(m.mu @ si_one), float(np.ones(m.n) @ si_one)


def markowitz_critical(m: ValidatedModel, E: float) -> np.ndarray:
    """Minimum-variance portfolio at target return E (Merton's closed form).

    The stationarity condition puts ``sigma @ x`` in span{mu, ones}; both
    equality constraints are verified to CONSTRAINT_TOL before returning.
    Weights come back in the caller's asset order.
    """
    low = cholesky_spd(m.sigma)
    si_mu = solve_cholesky(low, m.mu)
    si_one = solve_cholesky(low, np.ones(m.n))
    alpha_m = float(m.mu @ si_mu)
    beta_m = float(m.mu @ si_one)
    gamma_m = float(np.ones(m.n) @ si_one)
    denom = alpha_m * gamma_m - beta_m * beta_m
    if denom <= 0.0:
        raise NumericalBreakdown("minimum-variance scalars lost strict positivity")
    x = ((E * gamma_m - beta_m) * si_mu + (alpha_m - E * beta_m) * si_one) / denom
    scale = max(1.0, abs(E))
    if abs(float(x @ m.mu) - E) > CONSTRAINT_TOL * scale or \
            abs(float(x.sum()) - 1.0) > CONSTRAINT_TOL:
        raise NumericalBreakdown("minimum-variance solve violated its constraints")
    return m.to_original(x)


def _embed(m: ValidatedModel, x_hat: np.ndarray) -> np.ndarray:
    """Lift reduced coordinates to a full internal weight vector."""
    return np.concatenate(([1.0 - float(x_hat.sum())], x_hat))


def _ray(m: ValidatedModel, r: ReducedModel, e_hat: float):
    """Feasible ray along which the objective decreases in degenerate regimes.

    Base point: the constrained minimizer of the quadratic part alone.  The
    direction keeps both constraints invariant and drives the auxiliary
    parameter of the scalar reduction to -inf at unit rate.
    """
    qinv_mu = solve_cholesky(r.qhat_chol, r.mu_hat)
    qinv_qh = solve_cholesky(r.qhat_chol, r.q_hat)
    base_hat = (e_hat / r.alpha_C) * qinv_mu
    dir_hat = (r.beta_C * qinv_mu - r.alpha_C * qinv_qh) / r.detG
    base = _embed(m, base_hat)
    direction = np.concatenate(([-float(dir_hat.sum())], dir_hat))
    return m.to_original(base), m.to_original(direction)


def solve_critical(m: ValidatedModel, r: ReducedModel, E: float) -> CriticalSolution:
    """Solve the equality-constrained problem at target return E.

    Dispatches on the independence flag and the sign of Delta; a Delta <= 0
    outcome is a reported regime, not an error.  Unique solutions are
    cross-checked by re-evaluating the risk measure at the returned weights.
    """
    e_hat = float(E) - m.mu1
    a, b = m.risk.a, m.risk.b

    if not r.independent:
        x = markowitz_critical(m, E)
        value = covar_portfolio(m, r, x).covar
        return CriticalSolution(E_hat=e_hat, x=x, value=value,
                                status=SolveStatus.MARKOWITZ_FALLBACK,
                                efficiency_class=None)

    regime = _delta_regime(r)
    if regime == 1:
        root = math.sqrt(r.Delta)
        if e_hat == 0.0:
            x_hat = np.zeros(m.n - 1)
            t_hat = 0.0
            lam1 = lam2 = 0.0
        else:
            qinv_mu = solve_cholesky(r.qhat_chol, r.mu_hat)
            qinv_qh = solve_cholesky(r.qhat_chol, r.q_hat)
            coef = abs(e_hat) * a / (r.alpha_C * root)
            x_hat = (e_hat / r.alpha_C) * qinv_mu \
                + coef * (r.beta_C * qinv_mu - r.alpha_C * qinv_qh)
            t_hat = r.beta_C / r.alpha_C * e_hat - abs(e_hat) * a * r.detG / (r.alpha_C * root)
            lam1 = e_hat / r.alpha_C + abs(e_hat) * a * r.beta_C / (r.alpha_C * root)
            lam2 = -abs(e_hat) * a / root
        value = -m.mu1 + a * m.sigma1 \
            + e_hat * (a * r.beta_C / r.alpha_C - 1.0) + abs(e_hat) / r.alpha_C * root
        x_int = _embed(m, x_hat)
        x = m.to_original(x_int)

        if abs(float(x_hat @ r.mu_hat) - e_hat) > CONSTRAINT_TOL * max(1.0, abs(e_hat)):
            raise NumericalBreakdown("critical solve violated the return constraint")
        recheck = covar_portfolio(m, r, x).covar
        if abs(recheck - value) > CHECK_RTOL * max(1.0, abs(value)):
            raise NumericalBreakdown(
                f"closed-form value {value!r} disagrees with re-evaluation {recheck!r}")
        return CriticalSolution(E_hat=e_hat, x=x, value=value,
                                status=SolveStatus.UNIQUE,
                                efficiency_class=classify_efficiency(r),
                                t_hat=t_hat, lambda1=lam1, lambda2=lam2)

    base, direction = _ray(m, r, e_hat)
    if regime == 0:
        infimum = -m.mu1 + a * m.sigma1 + e_hat * (a * r.beta_C / r.alpha_C - 1.0)
        return CriticalSolution(E_hat=e_hat, x=None, value=infimum,
                                status=SolveStatus.INFIMUM_NOT_ATTAINED,
                                efficiency_class=None,
                                ray_base=base, ray_direction=direction)
    return CriticalSolution(E_hat=e_hat, x=None, value=-math.inf,
                            status=SolveStatus.UNBOUNDED_BELOW,
                            efficiency_class=None,
                            ray_base=base, ray_direction=direction)


@dataclass(frozen=True)
class FrontierPoint:
    """One sampled point of a frontier, ready for plotting or CSV emission."""

    E: float
    value: float
    weights: np.ndarray
    efficient: bool
    status: str


def point_is_efficient(eff: EfficiencyClass, e_hat: float) -> bool:
    """Whether the critical portfolio at excess return e_hat is efficient."""
    if eff is EfficiencyClass.NONE_EFFICIENT:
        return False
    if eff is EfficiencyClass.ALL_EFFICIENT:
        return True
    return e_hat >= -1e-12


def frontier(m: ValidatedModel, r: ReducedModel, e_min: float, e_max: float,
             steps: int) -> list[FrontierPoint]:
    """Sample the optimal value across a uniform target-return grid.

    Requires the unique-solution regime (Delta > 0); with dependent vectors
    the fallback critical set is sampled instead, flagged per the classical
    minimum-variance efficiency rule.  Output is ordered by E and independent
    of evaluation order.
    """
    if steps < 1 or (steps == 1 and e_min != e_max):
        raise DomainError("frontier needs steps >= 2, or steps == 1 with E_min == E_max")
    grid = np.linspace(e_min, e_max, steps)

    if not r.independent:
        _, beta_m, gamma_m = merton_scalars(m)
        gmv = beta_m / gamma_m
        points = []
        for e in grid:
            sol = solve_critical(m, r, float(e))
            points.append(FrontierPoint(E=float(e), value=sol.value, weights=sol.x,
                                        efficient=bool(e >= gmv - 1e-12),
                                        status=sol.status.value))
        return points

    if _delta_regime(r) != 1:
        raise PreconditionViolated(
            f"frontier is defined only for Delta > 0, got Delta={r.Delta!r}")
    eff = classify_efficiency(r)
    points = []
    for e in grid:
        sol = solve_critical(m, r, float(e))
        points.append(FrontierPoint(E=float(e), value=sol.value, weights=sol.x,
                                    efficient=point_is_efficient(eff, sol.E_hat),
                                    status=sol.status.value))
    return points
