"""Level-controlled clustering of country-years and level-epoch classification.

Observed ordinary cells are described by their effective core matrix with
the first age column removed -- the age-pattern shape independent of the
overall mortality level.  A Gaussian mixture over the PCA-reduced
features, with the component count picked by BIC, defines the mortality
regimes; country and year labels follow by majority vote, and the level
column itself feeds a rolling-slope classification of each country's
trajectory into improvement/stagnation/worsening epochs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InsufficientData
from .numerics import gmm_fit_em, lowess, pca_fit, ward_cluster


@dataclass
class AgeStructureFeatures:
    """Per-cell shape features plus the removed level columns."""

    cells: list  # (c, t) pairs, observed ordinary only
    features: np.ndarray  # (n, r1*(r2-1))
    levels: np.ndarray  # (n, r1): the dropped first age column of G_ct
    grand_level: np.ndarray  # (n,): G_ct[0, 0], the level trajectory signal


def extract_features(model, tensor):
    """Age-structure features f_ct for every observed ordinary cell."""
    cells = tensor.observed_cells()
    feats = np.empty((len(cells), model.ranks[0] * (model.ranks[1] - 1)))
    levels = np.empty((len(cells), model.ranks[0]))
    grand = np.empty(len(cells))
    for i, (c, t) in enumerate(cells):
        g_ct = model.effective_core(c, t)
        feats[i] = g_ct[:, 1:].reshape(-1)
        levels[i] = g_ct[:, 0]
        grand[i] = g_ct[0, 0]
    return AgeStructureFeatures(cells=cells, features=feats, levels=levels, grand_level=grand)


@dataclass
class ClusterModel:
    pca: object
    gmm: object
    n_clusters: int
    bic_table: dict  # k -> BIC
    cells: list
    labels: np.ndarray  # per cell, argmax responsibility
    country_labels: dict  # country index -> cluster
    year_labels: dict  # year index -> cluster

    def label_of(self, c, t):
        try:
            return int(self.labels[self.cells.index((c, t))])
        except ValueError:
            return None

    def predict(self, features):
        return self.gmm.predict(self.pca.transform(features))

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.save(directory / "cells.npy", np.array(self.cells, dtype=np.int64))
        np.save(directory / "labels.npy", self.labels)
        np.save(directory / "pca_mean.npy", self.pca.mean)
        np.save(directory / "pca_components.npy", self.pca.components)
        np.save(directory / "gmm_weights.npy", self.gmm.weights)
        np.save(directory / "gmm_means.npy", np.array(self.gmm.means))
        np.save(directory / "gmm_covs.npy", np.array(self.gmm.covariances))
        manifest = {
            "n_clusters": self.n_clusters,
            "bic_table": {str(k): v for k, v in self.bic_table.items()},
            "country_labels": {str(k): int(v) for k, v in self.country_labels.items()},
            "year_labels": {str(k): int(v) for k, v in self.year_labels.items()},
            "gmm_log_likelihood": self.gmm.log_likelihood,
            "gmm": {
                "weights": self.gmm.weights.tolist(),
                "means": [m.tolist() for m in self.gmm.means],
                "covariances": [c.tolist() for c in self.gmm.covariances],
            },
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory):
        from .numerics.linalg import PcaModel
        from .numerics.mixture import Gmm

        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        comps = np.load(directory / "pca_components.npy")
        pca = PcaModel(
            mean=np.load(directory / "pca_mean.npy"),
            components=comps,
            explained_variance_ratio=np.zeros(comps.shape[0]),
            singular_values=np.zeros(comps.shape[0]),
        )
        means = np.load(directory / "gmm_means.npy")
        covs = np.load(directory / "gmm_covs.npy")
        gmm = Gmm(
            weights=np.load(directory / "gmm_weights.npy"),
            means=[m for m in means],
            covariances=[c for c in covs],
            log_likelihood=manifest["gmm_log_likelihood"],
        )
        cells = [tuple(int(v) for v in row) for row in np.load(directory / "cells.npy")]
        return cls(
            pca=pca,
            gmm=gmm,
            n_clusters=manifest["n_clusters"],
            bic_table={int(k): v for k, v in manifest["bic_table"].items()},
            cells=cells,
            labels=np.load(directory / "labels.npy"),
            country_labels={int(k): v for k, v in manifest["country_labels"].items()},
            year_labels={int(k): v for k, v in manifest["year_labels"].items()},
        )


def fit_clusters(
    feats,
    k_range=range(2, 16),
    pca_target=0.999,
    restarts=5,
    max_iter=200,
    rng=None,
    k_override=None,
):
    """BIC-selected Gaussian mixture over PCA-reduced shape features.

    ``k_override`` forces the component count while still reporting the
    full BIC table (both clustering granularities stay reachable).
    """
    rng = np.random.default_rng(rng)
    n = feats.features.shape[0]
    k_range = [k for k in k_range if k <= n]
    if not k_range:
        raise InsufficientData("fewer rows than the smallest candidate k")
    pca = pca_fit(feats.features, pca_target)
    scores = pca.transform(feats.features)

    bic_table = {}
    fits = {}
    for k in k_range:
        model = gmm_fit_em(
            scores, k, restarts=restarts, max_iter=max_iter,
            rng=rng.integers(0, 2**63 - 1),
        )
        bic_table[k] = float(model.bic(n))
        fits[k] = model
    chosen = (
        int(k_override)
        if k_override is not None
        else min(bic_table, key=lambda k: (bic_table[k], k))
    )
    if chosen not in fits:
        fits[chosen] = gmm_fit_em(
            scores, chosen, restarts=restarts, max_iter=max_iter,
            rng=rng.integers(0, 2**63 - 1),
        )
    gmm = fits[chosen]
    labels = gmm.predict(scores)
    country_labels, year_labels = derive_country_year_labels(feats.cells, labels)
    return ClusterModel(
        pca=pca,
        gmm=gmm,
        n_clusters=chosen,
        bic_table=bic_table,
        cells=feats.cells,
        labels=labels,
        country_labels=country_labels,
        year_labels=year_labels,
    )


def _majority(values, labels):
    """Plurality label per key; ties break to the lowest cluster index."""
    out = {}
    for key in sorted(set(values)):
        sel = [lab for v, lab in zip(values, labels) if v == key]
        counts = np.bincount(sel)
        out[key] = int(np.argmax(counts))  # argmax takes the lowest on ties
    return out


def derive_country_year_labels(cells, labels):
    countries = [c for c, _ in cells]
    years = [t for _, t in cells]
    return _majority(countries, labels), _majority(years, labels)


def ward_agreement(cluster_model, feats):
    """Fraction of cells on which Ward clustering (same scores, same k)
    agrees with the mixture labels, after optimal label matching."""
    scores = cluster_model.pca.transform(feats.features)
    wl = ward_cluster(scores, cluster_model.n_clusters)
    gl = cluster_model.labels
    k = cluster_model.n_clusters
    confusion = np.zeros((k, k))
    for a, b in zip(gl, wl):
        confusion[a, b] += 1
    rows, cols = linear_sum_assignment(-confusion)
    return float(confusion[rows, cols].sum() / len(gl))


RAPID_IMPROVEMENT = "rapid improvement"
SLOW_IMPROVEMENT = "slow improvement"
STAGNATION = "stagnation"
SLOW_WORSENING = "slow worsening"
RAPID_WORSENING = "rapid worsening"
UNASSIGNED = "unassigned"

# distance from stagnation, worsening outranking improvement on ties
_SEVERITY = {
    STAGNATION: 0,
    SLOW_IMPROVEMENT: 1,
    SLOW_WORSENING: 2,
    RAPID_IMPROVEMENT: 3,
    RAPID_WORSENING: 4,
}


@dataclass
class EpochParams:
    window: int = 15
    delta: float = 0.05
    delta_rapid: float = 0.20
    lowess_frac: float = 0.3


@dataclass
class EpochCalendar:
    categories: dict  # country key -> {year -> category}
    params: EpochParams

    def epochs_for(self, key):
        """Contiguous same-category runs as (start, end, category)."""
        cal = self.categories.get(key, {})
        runs = []
        for year in sorted(cal):
            cat = cal[year]
            if runs and runs[-1][2] == cat and year == runs[-1][1] + 1:
                runs[-1] = (runs[-1][0], year, cat)
            else:
                runs.append((year, year, cat))
        return runs


def classify_slope(slope, params):
    if slope < -params.delta_rapid:
        return RAPID_IMPROVEMENT
    if slope < -params.delta:
        return SLOW_IMPROVEMENT
    if slope <= params.delta:
        return STAGNATION
    if slope <= params.delta_rapid:
        return SLOW_WORSENING
    return RAPID_WORSENING


def classify_epochs(level_series, params=None):
    """Five-way level-trend classification per country-year.

    ``level_series`` maps a country key to (years, levels) arrays of
    non-exceptional observations.  The level series is LOWESS-smoothed,
    OLS slopes are extracted over every complete sliding window of
    ``params.window`` consecutive calendar years, and each year takes the
    modal category of the windows covering it.  Years in no complete
    window, and countries with fewer observations than one window, stay
    unassigned (reported as absent from the calendar).
    """
    params = params or EpochParams()
    w = params.window
    categories = {}
    for key, (years, levels) in level_series.items():
        years = np.asarray(years, dtype=int)
        levels = np.asarray(levels, dtype=float)
        order = np.argsort(years)
        years, levels = years[order], levels[order]
        cal = {}
        if len(years) >= max(w, 3):
            smoother = lowess(years.astype(float), levels, frac=params.lowess_frac)
            smoothed = smoother(years.astype(float))
            year_to_idx = {int(y): i for i, y in enumerate(years)}
            votes = {int(y): [] for y in years}
            for start in range(int(years[0]), int(years[-1]) - w + 2):
                member_years = list(range(start, start + w))
                if any(y not in year_to_idx for y in member_years):
                    continue  # incomplete window
                idx = [year_to_idx[y] for y in member_years]
                xs = years[idx].astype(float)
                ys = smoothed[idx]
                xc = xs - xs.mean()
                slope = float((xc @ (ys - ys.mean())) / (xc @ xc))
                cat = classify_slope(slope, params)
                for y in member_years:
                    votes[y].append(cat)
            for y, cats in votes.items():
                if not cats:
                    continue
                counts = {}
                for cat in cats:
                    counts[cat] = counts.get(cat, 0) + 1
                best = max(counts, key=lambda cat: (counts[cat], _SEVERITY[cat]))
                cal[y] = best
        categories[key] = cal
    return EpochCalendar(categories=categories, params=params)
