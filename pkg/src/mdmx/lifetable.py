"""Logit-scale transforms and single-year period life table machinery.

All mortality modeling happens on logit(qx); this module owns the
transform, its floor for zero rates, and the qx -> lx -> Lx -> e0 chain
with a fixed infant separation factor a0 = 0.3.  The last tracked age is
treated as a closed interval: survivorship beyond it is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInput

INFANT_A0 = 0.3
QX_CLAMP_HIGH = 1.0 - 1e-12


@dataclass
class TransformConfig:
    """Floor for zero death probabilities and the tracked age count."""

    q_min: float = 1e-8
    n_ages: int = 110

    def __post_init__(self):
        if not (0.0 < self.q_min < 1e-3):
            raise InvalidInput(f"q_min {self.q_min} outside (0, 1e-3)")
        if self.n_ages < 2:
            raise InvalidInput("need at least 2 ages")


@dataclass
class Schedule:
    """One sex's qx vector for a population-year."""

    qx: np.ndarray
    sex: str = "female"
    population: str = ""
    year: int = 0

    def __post_init__(self):
        self.qx = np.asarray(self.qx, dtype=float)
        if self.sex not in ("female", "male"):
            raise InvalidInput(f"sex must be female|male, got {self.sex!r}")


@dataclass
class LifeTable:
    qx: np.ndarray
    mx: np.ndarray
    ax: np.ndarray
    lx: np.ndarray
    dx: np.ndarray
    Lx: np.ndarray
    Tx: np.ndarray
    ex: np.ndarray

    @property
    def e0(self):
        return float(self.Tx[0])


def logit(q):
    """Log-odds of a probability; q must lie strictly inside (0, 1)."""
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0.0) or np.any(q >= 1.0):
        raise DomainError("logit requires values in the open interval (0, 1)")
    return np.log(q / (1.0 - q))


def expit(y):
    """Inverse logit; maps the real line into (0, 1)."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y, dtype=float)
    pos = y >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
    ey = np.exp(y[~pos])
    out[~pos] = ey / (1.0 + ey)
    return out if out.ndim else float(out)


def floor_and_logit(qx, cfg=None):
    """Apply the zero floor then the logit transform to a qx vector."""
    cfg = cfg or TransformConfig()
    qx = np.asarray(qx, dtype=float)
    if np.any(qx >= 1.0):
        raise DomainError("qx >= 1 must be truncated before transforming")
    if np.any(qx < 0.0):
        raise DomainError("qx must be nonnegative")
    return logit(np.maximum(qx, cfg.q_min))


def survivorship(qx):
    """lx column (length A+1, l0 = 1) from a qx vector."""
    qx = np.asarray(qx, dtype=float)
    lx = np.empty(len(qx) + 1)
    lx[0] = 1.0
    np.cumprod(1.0 - qx, out=lx[1:])
    return lx


def person_years(qx, a0=INFANT_A0):
    """Lx column under uniform deaths, with the infant separation factor."""
    lx = survivorship(qx)
    big_l = 0.5 * (lx[:-1] + lx[1:])
    big_l[0] = a0 * lx[0] + (1.0 - a0) * lx[1]
    return big_l


def e0_from_qx(qx, a0=INFANT_A0):
    """Life expectancy at birth from a single-year qx vector."""
    return float(person_years(qx, a0).sum())


def lifetable_from_qx(qx, a0=INFANT_A0):
    """Full life table from qx alone (ax = 0.5 above age 0)."""
    qx = np.asarray(qx, dtype=float)
    ax = np.full(len(qx), 0.5)
    ax[0] = a0
    lx_full = survivorship(qx)
    lx = lx_full[:-1]
    dx = lx - lx_full[1:]
    big_l = lx_full[1:] + ax * dx
    tx = np.cumsum(big_l[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ex = np.where(lx > 0, tx / lx, 0.0)
        mx = np.where(big_l > 0, dx / big_l, 0.0)
    return LifeTable(qx=qx, mx=mx, ax=ax, lx=lx, dx=dx, Lx=big_l, Tx=tx, ex=ex)


def lifetable_from_mx_ax(mx, ax):
    """Internally consistent life table from central rates and ax values.

    qx = mx / (1 + (1 - ax) mx), clamped just below 1 to keep the logit
    finite; remaining columns follow the standard identities.
    """
    mx = np.asarray(mx, dtype=float)
    ax = np.asarray(ax, dtype=float)
    if mx.shape != ax.shape:
        raise InvalidInput("mx and ax must have the same length")
    if np.any(mx < 0):
        raise DomainError("mx must be nonnegative")
    if np.any((ax < 0) | (ax > 1)):
        raise DomainError("ax must lie in [0, 1]")
    qx = mx / (1.0 + (1.0 - ax) * mx)
    qx = np.minimum(qx, QX_CLAMP_HIGH)
    lx_full = survivorship(qx)
    lx = lx_full[:-1]
    dx = lx - lx_full[1:]
    big_l = lx_full[1:] + ax * dx
    big_l[0] = lx_full[1] + ax[0] * dx[0]
    tx = np.cumsum(big_l[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ex = np.where(lx > 0, tx / lx, 0.0)
    return LifeTable(qx=qx, mx=mx, ax=ax, lx=lx, dx=dx, Lx=big_l, Tx=tx, ex=ex)


def mx_from_qx(qx, ax=None):
    """Central death rates implied by qx under the within-interval ax."""
    qx = np.asarray(qx, dtype=float)
    if ax is None:
        ax = np.full(len(qx), 0.5)
    ax = np.asarray(ax, dtype=float)
    return qx / (1.0 - (1.0 - ax) * qx)


def split_pair(z):
    """Split a stacked female-then-male vector into its two halves."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size % 2 != 0:
        raise InvalidInput("paired vector must be one-dimensional with even length")
    half = z.size // 2
    return z[:half], z[half:]


def forward_e0(z, summary="mean"):
    """Life expectancy summary of a stacked logit(qx) pair.

    The first half of ``z`` is the female schedule, the second the male
    schedule.  ``summary`` selects the female value, the male value, or
    their unweighted mean.
    """
    zf, zm = split_pair(z)
    e0_f = e0_from_qx(expit(zf))
    e0_m = e0_from_qx(expit(zm))
    if summary == "female":
        return e0_f
    if summary == "male":
        return e0_m
    if summary == "mean":
        return 0.5 * (e0_f + e0_m)
    raise InvalidInput(f"summary must be female|male|mean, got {summary!r}")


def forward_e0_pair(z):
    """(female e0, male e0) of a stacked logit(qx) pair."""
    zf, zm = split_pair(z)
    return e0_from_qx(expit(zf)), e0_from_qx(expit(zm))
