"""Gaussian mixture models fit by expectation-maximization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInput


@dataclass
class Gmm:
    """Fitted Gaussian mixture with full covariances."""

    weights: np.ndarray
    means: list
    covariances: list
    log_likelihood: float
    ll_history: list = field(default_factory=list)

    @property
    def k(self):
        return len(self.means)

    def log_prob_components(self, points):
        """log N(x | mean_j, cov_j) + log w_j for every point and component."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n, d = points.shape
        out = np.empty((n, self.k))
        for j in range(self.k):
            out[:, j] = _log_gauss(points, self.means[j], self.covariances[j])
            out[:, j] += np.log(max(self.weights[j], 1e-300))
        return out

    def responsibilities(self, points):
        lp = self.log_prob_components(points)
        lse = _logsumexp(lp)
        return np.exp(lp - lse[:, None])

    def predict(self, points):
        return np.argmax(self.log_prob_components(points), axis=1)

    def score(self, points):
        """Total log-likelihood of the points under the mixture."""
        return float(_logsumexp(self.log_prob_components(points)).sum())

    def n_parameters(self):
        d = len(self.means[0])
        return (self.k - 1) + self.k * d + self.k * d * (d + 1) // 2

    def bic(self, n_obs):
        return -2.0 * self.log_likelihood + self.n_parameters() * np.log(n_obs)


def _logsumexp(a):
    m = a.max(axis=1)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))


def _log_gauss(points, mean, cov):
    d = len(mean)
    chol = np.linalg.cholesky(cov)
    diff = points - mean
    sol = np.linalg.solve(chol, diff.T)
    maha = (sol**2).sum(axis=0)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))


def _regularize(cov, floor):
    """Stabilize a covariance until Cholesky succeeds."""
    cov = 0.5 * (cov + cov.T)
    bump = floor
    for _ in range(12):
        try:
            np.linalg.cholesky(cov)
            return cov
        except np.linalg.LinAlgError:
            cov = cov + bump * np.eye(cov.shape[0])
            bump *= 10.0
    raise InvalidInput("covariance could not be regularized")


def _kmeanspp_seeds(points, k, rng):
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(
            [((points - c) ** 2).sum(axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(points[rng.integers(n)])
            continue
        probs = d2 / total
        centers.append(points[rng.choice(n, p=probs)])
    return np.array(centers)


def gmm_fit_em(points, k, restarts=5, max_iter=200, tol=1e-7, rng=None):
    """Fit a k-component full-covariance Gaussian mixture by EM.

    Runs ``restarts`` EM passes from k-means++-style seeds and keeps the
    best by final log-likelihood.  The per-iteration log-likelihood
    sequence of the winning run is recorded in ``ll_history``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    if k < 1:
        raise InvalidInput("k must be >= 1")
    if k > n:
        raise InvalidInput(f"k={k} exceeds number of points {n}")
    rng = np.random.default_rng(rng)

    feat_var = points.var(axis=0).mean()
    cov_floor = 1e-6 * max(feat_var, 1e-12)

    if k == 1:
        mean = points.mean(axis=0)
        cov = _regularize(np.cov(points.T, bias=True).reshape(d, d), cov_floor)
        model = Gmm(np.array([1.0]), [mean], [cov], 0.0)
        model.log_likelihood = model.score(points)
        model.ll_history = [model.log_likelihood]
        return model

    best = None
    for _ in range(max(1, restarts)):
        model = _em_single(points, k, max_iter, tol, cov_floor, rng)
        if best is None or model.log_likelihood > best.log_likelihood:
            best = model
    return best


def _em_single(points, k, max_iter, tol, cov_floor, rng):
    n, d = points.shape
    means = list(_kmeanspp_seeds(points, k, rng))
    base_cov = _regularize(np.cov(points.T, bias=True).reshape(d, d), cov_floor)
    covs = [base_cov.copy() for _ in range(k)]
    weights = np.full(k, 1.0 / k)
    model = Gmm(weights, means, covs, -np.inf)

    history = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        lp = model.log_prob_components(points)
        lse = _logsumexp(lp)
        ll = float(lse.sum())
        history.append(ll)
        resp = np.exp(lp - lse[:, None])

        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-12)
        weights = nk / n
        means = []
        covs = []
        for j in range(k):
            mu = (resp[:, j : j + 1] * points).sum(axis=0) / nk[j]
            diff = points - mu
            cov = (resp[:, j : j + 1] * diff).T @ diff / nk[j]
            means.append(mu)
            covs.append(_regularize(cov, cov_floor))
        model = Gmm(weights, means, covs, ll)

        if np.isfinite(prev_ll) and ll - prev_ll < tol * max(1.0, abs(ll)):
            break
        prev_ll = ll

    model.log_likelihood = model.score(points)
    history.append(model.log_likelihood)
    model.ll_history = history
    return model
