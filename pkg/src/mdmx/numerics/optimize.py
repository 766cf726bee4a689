"""Scalar root finding and bound-constrained minimization."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq, minimize

from ..errors import BracketError, OptimizationFailed


def brent_root(f, lo, hi, tol=1e-10):
    """Root of a continuous function on a bracketing interval [lo, hi]."""
    flo, fhi = f(lo), f(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)):
        raise BracketError("function not finite at bracket endpoints")
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    return float(brentq(f, lo, hi, xtol=tol))


def _central_diff_grad(f, step_scale=1e-5):
    def grad(x):
        x = np.asarray(x, dtype=float)
        g = np.empty_like(x)
        for i in range(len(x)):
            h = step_scale * max(1.0, abs(x[i]))
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            g[i] = (f(xp) - f(xm)) / (2.0 * h)
        return g

    return grad


def bounded_minimize(f, x0, lower, upper, max_iter=200):
    """Bound-constrained quasi-Newton minimization with numeric gradients.

    Gradients are central differences with step 1e-5 * max(1, |x_i|);
    the search never evaluates outside [lower, upper].
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x0.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x0.shape)
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise OptimizationFailed("x0 outside bounds")
    f0 = f(x0)
    if not np.isfinite(f0):
        raise OptimizationFailed("objective not finite at x0")

    def safe_f(x):
        # clip guards the central-difference probes at active bounds
        v = f(np.clip(x, lower, upper))
        return v if np.isfinite(v) else 1e30

    grad = _central_diff_grad(safe_f)
    res = minimize(
        safe_f,
        x0,
        jac=grad,
        method="L-BFGS-B",
        bounds=list(zip(lower, upper)),
        options={"maxiter": max_iter},
    )
    x_star = np.clip(res.x, lower, upper)
    if f(x_star) > f0:
        x_star = x0.copy()
    return x_star
