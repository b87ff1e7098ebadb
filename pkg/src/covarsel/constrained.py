"""Minimization under the no-short-selling constraint.

Feasible sets are the standard simplex or its intersection with a target
return hyperplane.  The objective ``c'x + b sqrt(x'Qx)`` (with
``c = a q - mu``) is convex but not smooth where the quadratic form vanishes,
and that point can be the optimum, so the solver proceeds in two phases:

1. smoothing continuation: minimize ``c'x + b sqrt(x'Qx + eps^2)`` by
   projected gradient descent with exact Euclidean projection onto the
   feasible polytope, halving eps from 1e-2 down to 1e-12;
2. active-face polish: on the face identified by the smoothed iterate, the
   equality-constrained restriction collapses to the same scalar problem as
   the closed-form solver, so the face optimum is computed exactly and the
   active set is revised primal-dually until it certifies.

The polished point is accepted only if it does not increase the true
objective, so the smoothed phase bounds the error of the final answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleSlice, NoConvergence, NumericalBreakdown
from .linalg import PivotFailure, cholesky_spd, solve_cholesky
from .model import ValidatedModel
from .reduction import ReducedModel
from .closedform import FrontierPoint
from .riskmeasures import QUAD_FLOOR

EPS_START = 1e-2
EPS_FINAL = 1e-12
STAGE_BUDGET = 10_000
ACTIVE_TOL = 1e-7
HARD_ZERO = 1e-13
PRIMAL_TOL = 1e-11
DUAL_TOL = 1e-8
FACE_ROUNDS = 60


@dataclass(frozen=True)
class Simplex:
    """Feasible set {x >= 0, sum(x) = 1}."""


@dataclass(frozen=True)
class SimplexSlice:
    """Feasible set {x >= 0, sum(x) = 1, mu'x = E}."""

    E: float


@dataclass(frozen=True)
class ConstrainedProblem:
    model: ValidatedModel
    reduced: ReducedModel
    E: float | None = None

    def __post_init__(self):
        if self.E is not None:
            mu = self.model.mu
            if not (float(mu.min()) - 1e-12 <= self.E <= float(mu.max()) + 1e-12):
                raise InfeasibleSlice(
                    f"target return {self.E!r} outside [{mu.min()!r}, {mu.max()!r}]")

    @property
    def feasible_set(self):
        return Simplex() if self.E is None else SimplexSlice(self.E)


@dataclass(frozen=True)
class ConstrainedSolution:
    """``x`` is the polished point in the caller's asset order; the KKT fields
    are evaluated at the terminal smoothed iterate ``x_smoothed``."""

    x: np.ndarray
    value: float
    multiple: bool
    iterations: int
    kkt_residual: float
    kkt_min_dual: float
    active_set: tuple[int, ...]
    x_smoothed: np.ndarray = field(repr=False)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort based)."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, n + 1)
    mask = u * ks > css - 1.0
    rho = int(np.nonzero(mask)[0][-1])
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _slice_seed(mu: np.ndarray, target: float) -> np.ndarray:
    """A feasible point of the slice polytope: mix of extreme-return vertices."""
    lo = int(np.argmin(mu))
    hi = int(np.argmax(mu))
    if mu[hi] == mu[lo]:
        raise InfeasibleSlice("all expected returns equal on the slice")
    t = (target - mu[lo]) / (mu[hi] - mu[lo])
    t = min(1.0, max(0.0, t))
    x = np.zeros(mu.shape[0])
    x[lo] = 1.0 - t
    x[hi] = t
    return x


def _project_polytope(v: np.ndarray, rows: np.ndarray, rhs: np.ndarray,
                      x_start: np.ndarray) -> np.ndarray:
    """Projection onto {x >= 0, rows @ x = rhs} by a primal active-set method.

    ``x_start`` must be feasible.  Each round solves the equality-constrained
    projection on the current free set, steps to the first blocking bound when
    the solution leaves the orthant, and releases the most negative bound
    multiplier otherwise.
    """
    n = v.shape[0]
    x = x_start.copy()
    active = x <= 0.0
    for _ in range(8 * n + 16):
        free = ~active
        sub = rows[:, free]
        gram = sub @ sub.T
        target = rhs - sub @ v[free]
        lam, *_ = np.linalg.lstsq(gram, target, rcond=None)
        y = v[free] + sub.T @ lam
        if y.min() >= -PRIMAL_TOL:
            cand = np.zeros(n)
            cand[free] = np.maximum(y, 0.0)
            mult = (cand - v) - rows.T @ lam
            if not active.any() or mult[active].min() >= -1e-10 * max(1.0, np.abs(v).max()):
                return cand
            worst = np.flatnonzero(active)[int(np.argmin(mult[active]))]
            active[worst] = False
            x = cand
            continue
        xf = x[free]
        step = 1.0
        blocker = -1
        for i in range(y.shape[0]):
            if y[i] < xf[i] and y[i] < 0.0:
                frac = xf[i] / (xf[i] - y[i])
                if frac < step:
                    step = frac
                    blocker = i
        xf = xf + step * (y - xf)
        x = np.zeros(n)
        x[free] = np.maximum(xf, 0.0)
        if blocker >= 0:
            active[np.flatnonzero(free)[blocker]] = True
        else:
            break
    check = rows @ x - rhs
    if np.abs(check).max() > 1e-8 or x.min() < -1e-9:
        raise NoConvergence("polytope projection failed to converge")
    return x


class _Feasible:
    """Projection and seed for one feasible polytope, internal coordinates."""

    def __init__(self, m: ValidatedModel, target: float | None):
        self.n = m.n
        self.target = target
        if target is None:
            self.rows = np.ones((1, m.n))
            self.rhs = np.array([1.0])
        else:
            self.rows = np.vstack([np.ones(m.n), m.mu])
            self.rhs = np.array([1.0, float(target)])
            self._seed = _slice_seed(m.mu, float(target))

    def seed(self) -> np.ndarray:
        if self.target is None:
            return np.full(self.n, 1.0 / self.n)
        return self._seed.copy()

    def project(self, v: np.ndarray) -> np.ndarray:
        if self.target is None:
            return project_simplex(v)
        return _project_polytope(v, self.rows, self.rhs, self._seed)


def _pgd_stage(x, grad_fn, val_fn, proj, eps):
    """Projected gradient descent with Armijo backtracking, one eps stage.

    The stage only needs to localize the optimal face; exactness comes from
    the polish afterwards.  A stage ends when the projected step stalls, when
    descent is no longer expressible in double precision, or at the budget.
    """
    step = 1.0
    g = grad_fn(x)
    fx = val_fn(x)
    for it in range(STAGE_BUDGET):
        d = proj(x - step * g) - x
        dn = float(np.abs(d).max())
        if dn <= max(1e-13, 1e-6 * eps):
            return x, it
        slope = float(g @ d)
        if not slope < -1e-18:
            step *= 0.25
            if step < 1e-15:
                return x, it
            continue
        t = 1.0
        accepted = False
        for _ in range(40):
            x_new = x + t * d
            f_new = val_fn(x_new)
            if f_new <= fx + 0.25 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            step *= 0.25
            if step < 1e-15:
                return x, it
            continue
        x_prev, g_prev = x, g
        x, fx = x_new, f_new
        g = grad_fn(x)
        dx = x - x_prev
        dg = g - g_prev
        denom = float(dx @ dg)
        if denom > 1e-30:
            step = min(max(float(dx @ dx) / denom, 1e-14), 1e8)
        else:
            step = min(step * 2.0, 1e8)
    return x, STAGE_BUDGET


def _face_solve(c, big_q, rows, rhs_vals, b_risk, free):
    """Exact minimum of ``c'y + b*sqrt(y'Qy)`` on one face's affine hull.

    Returns a dict with keys: kind ('point', 'unbounded', 'flat'), y (free
    coordinates), value, and for the unbounded/flat kinds a descent direction
    in free coordinates.  The quadratic block restricted through the nullspace
    of the equality rows is positive definite because the budget row excludes
    the degenerate direction.
    """
    cf = c[free]
    sub = rows[:, free]
    d = rhs_vals
    y0, *_ = np.linalg.lstsq(sub, d, rcond=None)
    if np.abs(sub @ y0 - d).max() > 1e-9 * max(1.0, np.abs(d).max()):
        return {"kind": "infeasible"}
    _, svals, vt = np.linalg.svd(sub)
    rank = int(np.sum(svals > 1e-12 * max(1.0, svals.max(initial=0.0))))
    null = vt[rank:].T
    if null.shape[1] == 0:
        quad = float(y0 @ big_q[np.ix_(np.flatnonzero(free), np.flatnonzero(free))] @ y0)
        root = 0.0 if quad < QUAD_FLOOR else math.sqrt(quad)
        return {"kind": "point", "y": y0, "value": float(cf @ y0 + b_risk * root)}

    idx = np.flatnonzero(free)
    m_face = big_q[np.ix_(idx, idx)]
    m_red = null.T @ m_face @ null
    m_red = 0.5 * (m_red + m_red.T)
    try:
        low = cholesky_spd(m_red, 1e-13)
    except PivotFailure as exc:
        raise NumericalBreakdown(f"face system lost definiteness: {exc}") from exc
    m_cross = null.T @ (m_face @ y0)
    c_red = null.T @ cf

    w_center = -solve_cholesky(low, m_cross)
    v_min = float(y0 @ m_face @ y0 + m_cross @ w_center)
    v_min = max(v_min, 0.0)
    base_lin = float(cf @ y0 + c_red @ w_center)

    c_norm = float(np.abs(c_red).max(initial=0.0))
    if c_norm <= 1e-14 * max(1.0, np.abs(cf).max(initial=0.0)):
        return {"kind": "point", "y": y0 + null @ w_center,
                "value": base_lin + b_risk * math.sqrt(v_min)}

    h = solve_cholesky(low, c_red)
    kappa = float(c_red @ h)
    gap = b_risk * b_risk - kappa
    v_tol = 1e-13 * max(1.0, float(np.abs(m_face).max()))
    if v_min <= v_tol:
        # The quadratic vanishes at the face center, so the objective behaves
        # like base_lin + tau + (b/sqrt(kappa))|tau| along the critical line.
        if gap > 1e-10 * b_risk * b_risk:
            return {"kind": "point", "y": y0 + null @ w_center, "value": base_lin}
        if gap < -1e-10 * b_risk * b_risk:
            return {"kind": "unbounded", "direction": -(null @ h),
                    "y": y0 + null @ w_center}
        return {"kind": "flat", "direction": -(null @ h),
                "y": y0 + null @ w_center, "value": base_lin}
    if gap <= 0.0:
        return {"kind": "unbounded", "direction": -(null @ h), "y": y0 + null @ w_center}
    tau = -kappa * math.sqrt(v_min / gap)
    u = (tau / kappa) * h
    return {"kind": "point", "y": y0 + null @ (w_center + u),
            "value": base_lin + math.sqrt(v_min * gap)}


def _exact_value(c, big_q, b_risk, x):
    quad = float(x @ big_q @ x)
    root = 0.0 if quad < QUAD_FLOOR else math.sqrt(quad)
    return float(c @ x + b_risk * root)


def _smoothed_grad(c, big_q, b_risk, eps, x):
    quad = float(x @ big_q @ x)
    return c + b_risk * (big_q @ x) / math.sqrt(quad + eps * eps)


def _newton_on_face(c, big_q, b_risk, eps, rows, rhs, y, free):
    """Damped Newton for the eps-smoothed stationarity inside one face."""
    sub = rows[:, free]
    gram = sub @ sub.T
    y = y.copy()
    for _ in range(3):
        corr, *_ = np.linalg.lstsq(gram, rhs - sub @ y[free], rcond=None)
        y[free] += sub.T @ corr
        low = float(y[free].min())
        if low >= 0.0:
            break
        if low < -1e-9:
            return None
        y[free] = np.maximum(y[free], 0.0)
    _, svals, vt = np.linalg.svd(sub)
    rank = int(np.sum(svals > 1e-12 * max(1.0, svals.max(initial=0.0))))
    null = vt[rank:].T
    if null.shape[1] == 0:
        return y
    idx = np.flatnonzero(free)
    qf = big_q[np.ix_(idx, idx)]
    cf = c[idx]
    for _ in range(40):
        yf = y[free]
        qy = qf @ yf
        s = math.sqrt(max(float(yf @ qy), 0.0) + eps * eps)
        g = cf + b_risk * qy / s
        gz = null.T @ g
        if float(np.abs(gz).max(initial=0.0)) <= 1e-13 * max(1.0, float(np.abs(g).max())):
            break
        hess = b_risk * (qf / s - np.outer(qy, qy) / s ** 3)
        hz = null.T @ hess @ null
        hz = 0.5 * (hz + hz.T) + 1e-14 * max(1.0, float(np.trace(hz))) * np.eye(hz.shape[0])
        try:
            dw = -np.linalg.solve(hz, gz)
        except np.linalg.LinAlgError:
            break
        step = null @ dw
        scale = 1.0
        for i in range(step.shape[0]):
            if step[i] < 0.0 and yf[i] + step[i] < 0.0:
                scale = min(scale, 0.5 * yf[i] / -step[i])
        if scale <= 0.0:
            # A coordinate sits at the wall and wants out; the caller will
            # reclassify it as active on the next round.
            break
        y = y.copy()
        y[free] = yf + scale * step
        if scale < 1e-10:
            break
    return y


def _stationary_polish(c, big_q, b_risk, eps, rows, rhs, x):
    """Drive the iterate to the eps-smoothed KKT point.

    Line search on objective values stalls once improvements underflow double
    precision (curvature scales like 1/eps near a degenerate point), so the
    endgame solves the reduced gradient equations by Newton instead.  Bounds
    are active only at machine scale; an active bound whose multiplier comes
    out clearly negative is released and the face re-solved, because the
    smoothed optimum can sit a few units of eps inside a face that projected
    descent landed exactly on.
    """
    best = x
    best_score = math.inf
    y = x.copy()
    for _ in range(16):
        active = y <= HARD_ZERO
        y = y.copy()
        y[active] = 0.0
        free = ~active
        if not free.any():
            break
        refined = _newton_on_face(c, big_q, b_risk, eps, rows, rhs, y, free)
        if refined is None:
            break
        y = refined
        resid, min_dual = _kkt_at(c, big_q, b_risk, rows, y, eps=eps)
        score = max(resid, -min_dual)
        if score < best_score:
            best, best_score = y, score
        g = _smoothed_grad(c, big_q, b_risk, eps, y)
        act = y <= HARD_ZERO
        if not act.any():
            break
        sub = rows[:, ~act]
        lam, *_ = np.linalg.lstsq(sub.T, g[~act], rcond=None)
        duals = g[act] - rows[:, act].T @ lam
        k = int(np.argmin(duals))
        if duals[k] >= -1e-8 * max(1.0, float(np.abs(g).max())):
            break
        y[np.flatnonzero(act)[k]] = max(10.0 * eps, 1e-11)
    return best


def _kkt_at(c, big_q, b_risk, rows, x, eps=EPS_FINAL, active_tol=HARD_ZERO):
    """Stationarity residual and smallest bound multiplier at x.

    A bound counts as active only at machine scale: the smoothed optimum can
    legitimately sit a few units of eps inside a face, and such coordinates
    are stationary rather than bound-constrained.  Multipliers for the
    equality rows come from least squares on the free coordinates; the
    residual is the free-coordinate stationarity defect and min_dual the
    smallest multiplier among active bounds (non-negative at an optimum).
    """
    g = _smoothed_grad(c, big_q, b_risk, eps, x)
    active = x <= active_tol
    free = ~active
    if not free.any():
        return float(np.abs(g).max(initial=0.0)), 0.0
    sub = rows[:, free]
    lam, *_ = np.linalg.lstsq(sub.T, g[free], rcond=None)
    resid = float(np.abs(g[free] - sub.T @ lam).max(initial=0.0))
    if active.any():
        min_dual = float((g[active] - rows[:, active].T @ lam).min())
    else:
        min_dual = 0.0
    return resid, min_dual


def minimize_constrained(problem: ConstrainedProblem, tol: float = 1e-9) -> ConstrainedSolution:
    """Minimize the conditional risk measure over the feasible polytope.

    The returned value is within max(tol, smoothing floor) of the true
    constrained minimum; the returned point is feasible to 1e-10.  Raises
    InfeasibleSlice for unreachable targets and NoConvergence if the descent
    machinery breaks down (ill-conditioned inputs).
    """
    m, r = problem.model, problem.reduced
    a, b_risk = m.risk.a, m.risk.b
    c = a * r.q - m.mu
    big_q = r.Q
    feas = _Feasible(m, problem.E)
    rows = feas.rows

    x = feas.project(feas.seed())
    total_iter = 0
    eps = EPS_START
    while True:
        grad_fn = lambda y, e=eps: _smoothed_grad(c, big_q, b_risk, e, y)
        val_fn = lambda y, e=eps: float(c @ y) + b_risk * math.sqrt(float(y @ big_q @ y) + e * e)
        x, used = _pgd_stage(x, grad_fn, val_fn, feas.project, eps)
        total_iter += used
        if eps <= EPS_FINAL:
            break
        eps = max(eps / 2.0, EPS_FINAL)
    x_smoothed = _stationary_polish(c, big_q, b_risk, EPS_FINAL, rows, feas.rhs, x)

    best_x = x_smoothed
    best_val = _exact_value(c, big_q, b_risk, x_smoothed)
    multiple = False

    active = x_smoothed <= ACTIVE_TOL
    x_cur = x_smoothed.copy()
    n = m.n
    for _ in range(FACE_ROUNDS):
        free = ~active
        if not free.any():
            break
        res = _face_solve(c, big_q, rows, feas.rhs, b_risk, free)
        if res["kind"] == "infeasible":
            released = np.flatnonzero(active)
            if released.size == 0:
                break
            active[released[0]] = False
            continue
        if res["kind"] in ("unbounded", "flat"):
            if res["kind"] == "flat":
                multiple = True
            direction = res["direction"]
            xf = np.maximum(x_cur[free], 0.0)
            steps = [xf[i] / -direction[i]
                     for i in range(direction.shape[0]) if direction[i] < -1e-14]
            if not steps:
                break
            theta = min(steps)
            y = xf + theta * direction
            blockers = np.flatnonzero(y <= PRIMAL_TOL)
            x_cur = np.zeros(n)
            x_cur[free] = np.maximum(y, 0.0)
            fidx = np.flatnonzero(free)
            for blk in blockers:
                active[fidx[blk]] = True
            continue
        y = res["y"]
        if y.min() < -PRIMAL_TOL:
            xf = np.maximum(x_cur[free], 0.0)
            move = y - xf
            theta = 1.0
            blocker = -1
            for i in range(y.shape[0]):
                if y[i] < -PRIMAL_TOL and move[i] < 0.0:
                    frac = xf[i] / -move[i]
                    if frac < theta:
                        theta = frac
                        blocker = i
            xf = xf + theta * move
            x_cur = np.zeros(n)
            x_cur[free] = np.maximum(xf, 0.0)
            if blocker >= 0:
                active[np.flatnonzero(free)[blocker]] = True
            continue
        cand = np.zeros(n)
        cand[free] = np.maximum(y, 0.0)
        quad = float(cand @ big_q @ cand)
        if quad < QUAD_FLOOR:
            # Degenerate face point: release any active bound whose edge
            # directional derivative is negative (subgradient-aware test).
            worst_idx, worst_val = -1, -1e-9 * max(1.0, abs(res["value"]))
            for i in np.flatnonzero(active):
                d = -cand.copy()
                d[i] += 1.0
                dd = float(c @ d) + b_risk * math.sqrt(max(float(d @ big_q @ d), 0.0))
                if dd < worst_val:
                    worst_val = dd
                    worst_idx = i
            if worst_idx >= 0:
                active[worst_idx] = False
                x_cur = cand
                continue
        else:
            g = _smoothed_grad(c, big_q, b_risk, EPS_FINAL, cand)
            sub = rows[:, free]
            lam, *_ = np.linalg.lstsq(sub.T, g[free], rcond=None)
            if active.any():
                duals = g[active] - rows[:, active].T @ lam
                scale = max(1.0, float(np.abs(g).max()))
                if duals.min() < -DUAL_TOL * scale:
                    rel = np.flatnonzero(active)[int(np.argmin(duals))]
                    active[rel] = False
                    x_cur = cand
                    continue
        if res["value"] <= best_val + tol:
            best_x, best_val = cand, min(res["value"], best_val)
        break

    feas_err = float(np.abs(rows @ best_x - feas.rhs).max())
    if feas_err > 1e-10 * max(1.0, float(np.abs(feas.rhs).max())) or \
            float(best_x.min()) < -1e-10:
        raise NoConvergence(
            f"constrained solve left the feasible set (defect {feas_err:.3e})")
    resid, min_dual = _kkt_at(c, big_q, b_risk, rows, x_smoothed)
    x_out = m.to_original(best_x)
    return ConstrainedSolution(x=x_out, value=best_val, multiple=multiple,
                               iterations=total_iter, kkt_residual=resid,
                               kkt_min_dual=min_dual,
                               active_set=tuple(int(i) for i in np.flatnonzero(best_x <= ACTIVE_TOL)),
                               x_smoothed=m.to_original(x_smoothed))


def kkt_certificate(problem: ConstrainedProblem, x, eps: float = EPS_FINAL):
    """(stationarity residual, smallest active-bound multiplier) at x.

    Evaluated with the eps-smoothed gradient; pass the solver's terminal
    smoothed iterate for a meaningful certificate when the optimum sits at a
    degenerate point of the square-root term.
    """
    m, r = problem.model, problem.reduced
    c = m.risk.a * r.q - m.mu
    feas = _Feasible(m, problem.E)
    xi = m.to_internal(np.asarray(x, dtype=float))
    return _kkt_at(c, r.Q, m.risk.b, feas.rows, xi, eps=eps)


def constrained_frontier(problem: ConstrainedProblem, e_grid) -> list[FrontierPoint]:
    """Constrained minimum per grid return; the lower envelope of the
    feasible region's image.  Points are flagged efficient when no other
    sampled point weakly dominates them (lower value at a return at least as
    high)."""
    m = problem.model
    sols = []
    for e in np.asarray(e_grid, dtype=float):
        sub = ConstrainedProblem(model=m, reduced=problem.reduced, E=float(e))
        sols.append((float(e), minimize_constrained(sub)))
    points = []
    for e, sol in sols:
        dominated = any(o_e >= e - 1e-12 and o_sol.value < sol.value - 1e-10
                        for o_e, o_sol in sols if o_sol is not sol)
        points.append(FrontierPoint(E=e, value=sol.value, weights=sol.x,
                                    efficient=not dominated, status="Constrained"))
    return points
