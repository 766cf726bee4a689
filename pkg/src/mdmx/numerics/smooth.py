"""Scatterplot and sequence smoothers: LOWESS, Savitzky-Golay, variable-bandwidth Gaussian."""

from __future__ import annotations

import numpy as np
from scipy.signal import savgol_filter

from ..errors import InsufficientData, InvalidInput


def lowess(x, y, frac=0.3, robust_iters=1):
    """Locally weighted linear regression smoother (Cleveland-style).

    Fits a local line with tricube weights around each query point and
    returns a callable evaluable anywhere in [min(x), max(x)].  One
    robustness iteration downweights outliers by default.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise InvalidInput("x and y must be equal-length vectors")
    if len(x) < 3:
        raise InsufficientData("lowess needs at least 3 points")
    if not (0.0 < frac <= 1.0):
        raise InvalidInput(f"frac {frac} outside (0, 1]")

    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    r = max(2, int(np.ceil(frac * n)))

    def local_fit(x0, delta):
        d = np.abs(xs - x0)
        h = np.sort(d)[min(r, n) - 1]
        if h <= 0:
            h = max(np.ptp(xs) * 1e-12, 1e-300)
        w = np.clip(d / h, 0.0, 1.0)
        w = (1.0 - w**3) ** 3
        w = w * delta
        sw = w.sum()
        if sw <= 0:
            return ys[np.argmin(d)]
        xw = (w * xs).sum() / sw
        yw = (w * ys).sum() / sw
        sxx = (w * (xs - xw) ** 2).sum()
        if sxx <= 1e-300:
            return yw
        beta = (w * (xs - xw) * (ys - yw)).sum() / sxx
        return yw + beta * (x0 - xw)

    delta = np.ones(n)
    for _ in range(max(0, int(robust_iters))):
        fitted = np.array([local_fit(xi, delta) for xi in xs])
        resid = ys - fitted
        s = np.median(np.abs(resid))
        if s <= 0:
            break
        u = np.clip(resid / (6.0 * s), -1.0, 1.0)
        delta = (1.0 - u**2) ** 2

    final_delta = delta

    def smoother(x_query):
        q = np.asarray(x_query, dtype=float)
        scalar = q.ndim == 0
        q = np.atleast_1d(q)
        out = np.array([local_fit(v, final_delta) for v in q])
        return out[0] if scalar else out

    smoother.x_range = (float(xs[0]), float(xs[-1]))
    return smoother


def lowess_multi(x, y_cols, queries, frac=0.3, robust_iters=1):
    """Locally weighted linear fits of many columns sharing one x vector.

    ``y_cols`` is (n, m); the result is (len(queries), m).  Equivalent to
    running :func:`lowess` per column but the tricube weights and local
    moments are computed once per query across all columns.
    """
    x = np.asarray(x, dtype=float)
    y_cols = np.atleast_2d(np.asarray(y_cols, dtype=float))
    queries = np.asarray(queries, dtype=float)
    n, m = y_cols.shape
    if len(x) != n:
        raise InvalidInput("x length must match y_cols rows")
    if n < 3:
        raise InsufficientData("lowess needs at least 3 points")
    if not (0.0 < frac <= 1.0):
        raise InvalidInput(f"frac {frac} outside (0, 1]")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y_cols[order]
    r = max(2, int(np.ceil(frac * n)))

    def fit_at(x0, delta):
        d = np.abs(xs - x0)
        h = np.sort(d)[min(r, n) - 1]
        if h <= 0:
            h = max(np.ptp(xs) * 1e-12, 1e-300)
        w = np.clip(d / h, 0.0, 1.0)
        w = (1.0 - w**3) ** 3
        wd = w[:, None] * delta  # (n, m)
        sw = wd.sum(axis=0)
        sw = np.maximum(sw, 1e-300)
        xw = (wd * xs[:, None]).sum(axis=0) / sw
        yw = (wd * ys).sum(axis=0) / sw
        dx = xs[:, None] - xw[None, :]
        sxx = (wd * dx**2).sum(axis=0)
        sxy = (wd * dx * (ys - yw)).sum(axis=0)
        beta = np.where(sxx > 1e-300, sxy / np.maximum(sxx, 1e-300), 0.0)
        return yw + beta * (x0 - xw)

    delta = np.ones((n, m))
    for _ in range(max(0, int(robust_iters))):
        fitted = np.vstack([fit_at(xi, delta) for xi in xs])
        resid = ys - fitted
        s = np.median(np.abs(resid), axis=0)
        s = np.maximum(s, 1e-300)
        u = np.clip(resid / (6.0 * s), -1.0, 1.0)
        delta = (1.0 - u**2) ** 2

    return np.vstack([fit_at(q, delta) for q in queries])


def savitzky_golay(y, window, degree, preserve_edges=False):
    """Savitzky-Golay least-squares polynomial filter.

    With ``preserve_edges`` the first and last floor(window/2) entries are
    returned unchanged instead of being fit with one-sided polynomials.
    """
    y = np.asarray(y, dtype=float)
    if window % 2 == 0:
        raise InvalidInput("window must be odd")
    if window <= degree:
        raise InvalidInput("window must exceed polynomial degree")
    if len(y) < window:
        raise InvalidInput(f"need at least {window} samples, got {len(y)}")
    out = savgol_filter(y, window, degree, mode="interp")
    if preserve_edges:
        half = window // 2
        out[:half] = y[:half]
        out[-half:] = y[-half:]
    return out


def gaussian_smooth_varbw(y, x_ramp, s_min, sigma_max):
    """Gaussian kernel smoother whose bandwidth ramps up with index.

    The kernel width at index x is
    ``sigma_max * (s_min + (1 - s_min) * min(x / x_ramp, 1))``: narrow at
    the start of the sequence, full width at and beyond ``x_ramp``.
    Weights are renormalized over the available index range.
    """
    y = np.asarray(y, dtype=float)
    if not (0.0 < s_min < 1.0):
        raise InvalidInput(f"s_min {s_min} outside (0, 1)")
    if sigma_max < 0:
        raise InvalidInput("sigma_max must be nonnegative")
    n = len(y)
    if sigma_max == 0 or n == 0:
        return y.copy()
    idx = np.arange(n, dtype=float)
    out = np.empty(n)
    for i in range(n):
        sigma = sigma_max * (s_min + (1.0 - s_min) * min(idx[i] / x_ramp, 1.0))
        if sigma <= 1e-12:
            out[i] = y[i]
            continue
        w = np.exp(-0.5 * ((idx - idx[i]) / sigma) ** 2)
        out[i] = (w * y).sum() / w.sum()
    return out


def bandwidth_profile(n, x_ramp, s_min, sigma_max):
    """Kernel width at each index, as used by :func:`gaussian_smooth_varbw`."""
    idx = np.arange(n, dtype=float)
    return sigma_max * (s_min + (1.0 - s_min) * np.minimum(idx / x_ramp, 1.0))
