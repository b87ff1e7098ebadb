"""Random model generation and small numeric oracles shared by the tests."""

import numpy as np

from covarsel import MarketModel, RiskParams, reduce_model, validate_model


def random_model(rng, n=None, a=None, b=None, conditioning_asset=None):
    """A well-conditioned random market: sigma = AA' + ridge, generic mu."""
    n = int(n if n is not None else rng.integers(3, 9))
    mat = rng.normal(size=(n, n))
    sigma = mat @ mat.T + 0.5 * np.trace(mat @ mat.T) / n * np.eye(n)
    mu = rng.normal(size=n) * 2.0
    while np.ptp(mu) < 1e-6:
        mu = rng.normal(size=n) * 2.0
    a = float(a if a is not None else rng.uniform(0.3, 2.5))
    b = float(b if b is not None else rng.uniform(0.3, 2.5))
    cond = int(conditioning_asset if conditioning_asset is not None
               else rng.integers(1, n + 1))
    m = validate_model(MarketModel(mu=mu, sigma=sigma, conditioning_asset=cond,
                                   risk=RiskParams(a=a, b=b)))
    return m, reduce_model(m)


def random_model_delta(rng, sign, n=None, factor=1.4):
    """Random market with the discriminant forced to the requested sign.

    With b = factor * a * sqrt(detG / alpha_C), Delta has the sign of
    factor - 1, so factor 1.4 gives Delta > 0 and 1/1.4 gives Delta < 0.
    """
    while True:
        m, r = random_model(rng, n=n, b=1.0)
        if not r.independent or r.detG <= 0:
            continue
        ratio = m.risk.a * np.sqrt(r.detG / r.alpha_C)
        b = ratio * (factor if sign > 0 else 1.0 / factor)
        m2 = validate_model(MarketModel(
            mu=m.to_original(m.mu), sigma=m.sigma[np.ix_(m.inv_perm, m.inv_perm)],
            conditioning_asset=int(m.perm[0]) + 1,
            risk=RiskParams(a=m.risk.a, b=float(b))))
        r2 = reduce_model(m2)
        if r2.independent and np.sign(r2.Delta) == sign:
            return m2, r2


def covar_value_raw(m, r, x_internal):
    """Objective value in internal coordinates, no route cross-check."""
    quad = max(float(x_internal @ r.Q @ x_internal), 0.0)
    return float(-(x_internal @ m.mu) + m.risk.a * (x_internal @ r.q)
                 + m.risk.b * np.sqrt(quad))


def slice_segment(m, target):
    """Parametrize {sum = 1, mu'x = E} for n = 3 as x0 + t*d with the feasible
    t-interval for x >= 0; returns (x0, d, lo, hi) in internal coordinates."""
    rows = np.vstack([np.ones(3), m.mu])
    rhs = np.array([1.0, target])
    x0, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    _, _, vt = np.linalg.svd(rows)
    d = vt[-1]
    lo, hi = -np.inf, np.inf
    for i in range(3):
        if d[i] > 1e-14:
            lo = max(lo, -x0[i] / d[i])
        elif d[i] < -1e-14:
            hi = min(hi, -x0[i] / d[i])
    return x0, d, lo, hi


def golden_section(fun, lo, hi, iters=140):
    """Golden-section minimization of a scalar unimodal function."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a_, b_ = float(lo), float(hi)
    for _ in range(iters):
        c_ = b_ - inv_phi * (b_ - a_)
        d_ = a_ + inv_phi * (b_ - a_)
        if fun(c_) < fun(d_):
            b_ = d_
        else:
            a_ = c_
    t = 0.5 * (a_ + b_)
    return t, fun(t)


def slice_min_oracle(m, r, target):
    """Constrained-slice minimum for n = 3 by golden section plus endpoints."""
    x0, d, lo, hi = slice_segment(m, target)
    if lo > hi:
        return None
    fun = lambda t: covar_value_raw(m, r, x0 + t * d)
    _, val = golden_section(fun, lo, hi)
    return min(val, fun(lo), fun(hi))
