"""Dense linear algebra: thin SVD, QR orthonormalization, PCA."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientData, InvalidInput, RankDeficient


def thin_svd(m):
    """Thin singular value decomposition of a dense matrix.

    Returns (U, s, V) with orthonormal-column U and V and descending
    nonnegative s such that U @ diag(s) @ V.T reconstructs ``m``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise InvalidInput(f"expected a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput("matrix contains non-finite entries")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return u, s, vt.T


def qr_orthonormalize(m):
    """Orthonormal basis for the column space of ``m`` via QR.

    Signs are fixed so the diagonal of R is nonnegative, which keeps the
    output close to an already-orthonormal input.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise InvalidInput(f"expected a matrix, got ndim={m.ndim}")
    q, r = np.linalg.qr(m)
    diag = np.diag(r)
    scale = np.linalg.norm(m, axis=0).max()
    if np.any(np.abs(diag) <= 1e-12 * max(scale, 1.0)):
        raise RankDeficient("columns are linearly dependent")
    signs = np.sign(diag)
    return q * signs


@dataclass
class PcaModel:
    """Principal component basis: row-vector components plus spectrum."""

    mean: np.ndarray
    components: np.ndarray  # (d, n_features), orthonormal rows
    explained_variance_ratio: np.ndarray
    singular_values: np.ndarray

    @property
    def n_components(self):
        return self.components.shape[0]

    def transform(self, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        return (rows - self.mean) @ self.components.T

    def inverse_transform(self, scores):
        scores = np.atleast_2d(np.asarray(scores, dtype=float))
        return scores @ self.components + self.mean


def pca_fit(rows, target):
    """Fit a PCA basis to row observations.

    ``target`` is either a variance fraction in (0, 1] (keep the smallest
    number of components whose cumulative explained ratio reaches it) or an
    integer component count.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise InsufficientData("PCA requires at least 2 rows")
    mean = rows.mean(axis=0)
    centered = rows - mean
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    var = s**2
    total = var.sum()
    ratios = var / total if total > 0 else np.zeros_like(var)

    if isinstance(target, (int, np.integer)) and not isinstance(target, bool):
        d = int(target)
        if d < 1 or d > len(s):
            raise InvalidInput(f"component count {d} outside 1..{len(s)}")
    else:
        frac = float(target)
        if not (0.0 < frac <= 1.0):
            raise InvalidInput(f"variance target {frac} outside (0, 1]")
        cum = np.cumsum(ratios)
        d = int(np.searchsorted(cum, frac - 1e-15) + 1)
        d = min(d, len(s))

    components = vt[:d]
    # sign convention: largest-magnitude entry of each component positive
    for i in range(d):
        j = np.argmax(np.abs(components[i]))
        if components[i, j] < 0:
            components[i] = -components[i]
    return PcaModel(
        mean=mean,
        components=components,
        explained_variance_ratio=ratios[:d],
        singular_values=s[:d],
    )
