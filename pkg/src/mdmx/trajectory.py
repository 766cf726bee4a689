"""Life-expectancy-indexed trajectories through sex-age schedule space.

Within each regime (and once over the whole corpus, id 0) every one of
the 2A schedule components is smoothed against the observation's life
expectancy, cached on a 150-node grid with finite-difference tangents.
Evaluating the grid at a target e0 and optionally root-polishing the
evaluation point until the forward life table returns that target gives
the generative baseline.  A single network over (cluster embedding, e0
features) complements the grids with smooth inter-cluster interpolation
and graceful extrapolation.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ExtrapolationError, InsufficientData
from .lifetable import forward_e0
from .numerics import AdamState, Mlp, MseLoss, pca_fit
from .numerics.neural import TrainSchedule, mlp_train
from .numerics.optimize import brent_root
from .numerics.smooth import lowess_multi

N_GRID_NODES = 150


@dataclass
class TrajectoryGrid:
    """Cached schedule trajectory for one cluster (0 = whole corpus)."""

    cluster: int
    e0_grid: np.ndarray  # (n_nodes,), strictly increasing
    values: np.ndarray  # (n_nodes, 2A)
    tangents: np.ndarray  # (n_nodes, 2A), d(values)/d(e0)
    n_observations: int = 0

    @property
    def e0_range(self):
        return float(self.e0_grid[0]), float(self.e0_grid[-1])

    def interpolate(self, e0, clip=False):
        """Linear interpolation of (values, tangents) at one e0.

        Outside the grid the edge segment extends linearly; callers
        enforce range policy themselves (``clip`` clamps instead).
        """
        lo, hi = self.e0_range
        u = float(np.clip(e0, lo, hi)) if clip else float(e0)
        g = self.e0_grid
        j = int(np.clip(np.searchsorted(g, u) - 1, 0, len(g) - 2))
        w = (u - g[j]) / (g[j + 1] - g[j])
        z = (1 - w) * self.values[j] + w * self.values[j + 1]
        t = (1 - w) * self.tangents[j] + w * self.tangents[j + 1]
        return z, t


def _finite_diff_tangents(grid, values):
    tang = np.empty_like(values)
    tang[1:-1] = (values[2:] - values[:-2]) / (grid[2:] - grid[:-2])[:, None]
    tang[0] = (values[1] - values[0]) / (grid[1] - grid[0])
    tang[-1] = (values[-1] - values[-2]) / (grid[-1] - grid[-2])
    return tang


def fit_grid_from_rows(e0s, z_rows, cluster=0, n_nodes=N_GRID_NODES, frac=0.3, robust_iters=1):
    """LOWESS grid over explicit (e0, schedule-row) pairs."""
    e0s = np.asarray(e0s, dtype=float)
    z_rows = np.atleast_2d(np.asarray(z_rows, dtype=float))
    lo, hi = float(e0s.min()), float(e0s.max())
    if hi - lo < 1e-9:
        raise InsufficientData("no e0 spread in trajectory group")
    grid = np.linspace(lo, hi, n_nodes)
    vals = lowess_multi(e0s, z_rows, grid, frac=frac, robust_iters=robust_iters)
    return TrajectoryGrid(
        cluster=cluster,
        e0_grid=grid,
        values=vals,
        tangents=_finite_diff_tangents(grid, vals),
        n_observations=len(e0s),
    )


def fit_trajectories(
    tensor,
    model,
    cluster_model=None,
    n_nodes=N_GRID_NODES,
    frac=0.3,
    robust_iters=1,
    min_observations=10,
    e0_summary="mean",
):
    """LOWESS trajectory grids: one corpus-wide (key 0) plus one per cluster.

    Cluster k's grid gets key k+1.  Groups with fewer than
    ``min_observations`` rows are skipped with a warning.
    """
    cells = tensor.observed_cells()
    z_rows = np.array([model.reconstruct_pair(c, t) for c, t in cells])
    e0s = np.array([forward_e0(z, e0_summary) for z in z_rows])

    groups = {0: np.arange(len(cells))}
    if cluster_model is not None:
        for k in range(cluster_model.n_clusters):
            groups[k + 1] = np.where(cluster_model.labels == k)[0]

    grids = {}
    for key, idx in groups.items():
        if len(idx) < min_observations:
            warnings.warn(
                f"trajectory group {key} has {len(idx)} observations; skipped"
            )
            continue
        e = e0s[idx]
        if e.max() - e.min() < 1e-9:
            warnings.warn(f"trajectory group {key} has no e0 spread; skipped")
            continue
        grids[key] = fit_grid_from_rows(
            e, z_rows[idx], cluster=key, n_nodes=n_nodes, frac=frac,
            robust_iters=robust_iters,
        )
    return grids


def reconstruct_at(
    grid,
    e0_star,
    refine=True,
    tol=0.01,
    e0_summary="mean",
    allow_extrapolation=False,
    search_margin=6.0,
):
    """Schedule at a target life expectancy from a trajectory grid.

    With ``refine`` the evaluation point is adjusted by root finding
    until the forward life table of the result matches ``e0_star`` to
    ``tol`` years.  Targets outside the grid raise ExtrapolationError
    (carrying the supported range) unless extrapolation is allowed.
    """
    lo, hi = grid.e0_range
    if not allow_extrapolation and not (lo - 1e-9 <= e0_star <= hi + 1e-9):
        raise ExtrapolationError(
            f"target e0 {e0_star:.2f} outside supported range [{lo:.2f}, {hi:.2f}]",
            supported_range=(lo, hi),
        )
    if not refine:
        return grid.interpolate(e0_star)[0]

    def gap(u):
        z, _ = grid.interpolate(u)
        return forward_e0(z, e0_summary) - e0_star

    g0 = gap(e0_star)
    if abs(g0) <= 0.25 * tol:
        return grid.interpolate(e0_star)[0]

    # walk outward for a bracket; the map u -> e0 is near the identity
    u_lo = u_hi = float(e0_star)
    g_lo = g_hi = g0
    step = max(4.0 * abs(g0), 0.25)
    lo_bound, hi_bound = lo - search_margin, hi + search_margin
    for _ in range(60):
        if g_lo > 0 and u_lo > lo_bound:
            u_lo = max(u_lo - step, lo_bound)
            g_lo = gap(u_lo)
        if g_hi < 0 and u_hi < hi_bound:
            u_hi = min(u_hi + step, hi_bound)
            g_hi = gap(u_hi)
        if g_lo <= 0 <= g_hi:
            break
        step *= 1.6
    if not (g_lo <= 0 <= g_hi):
        # monotone bracket unavailable; return the better endpoint
        u_best = u_lo if abs(g_lo) < abs(g_hi) else u_hi
        return grid.interpolate(u_best)[0]
    root = brent_root(gap, u_lo, u_hi, tol=1e-9)
    return grid.interpolate(root)[0]


def save_grids(grids, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = []
    for key in sorted(grids):
        g = grids[key]
        np.save(directory / f"grid_{key}_e0.npy", g.e0_grid)
        np.save(directory / f"grid_{key}_values.npy", g.values)
        np.save(directory / f"grid_{key}_tangents.npy", g.tangents)
        manifest.append(
            {
                "cluster": int(key),
                "n_nodes": int(len(g.e0_grid)),
                "e0_range": [float(g.e0_grid[0]), float(g.e0_grid[-1])],
                "n_observations": int(g.n_observations),
            }
        )
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_grids(directory):
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    grids = {}
    for entry in manifest:
        key = entry["cluster"]
        grids[key] = TrajectoryGrid(
            cluster=key,
            e0_grid=np.load(directory / f"grid_{key}_e0.npy"),
            values=np.load(directory / f"grid_{key}_values.npy"),
            tangents=np.load(directory / f"grid_{key}_tangents.npy"),
            n_observations=entry["n_observations"],
        )
    return grids


def cluster_centroids(tensor, model, cluster_model):
    """Mean reconstructed schedule per cluster, (K, 2A)."""
    k = cluster_model.n_clusters
    sums = np.zeros((k, 2 * tensor.n_ages))
    counts = np.zeros(k)
    for (c, t), lab in zip(cluster_model.cells, cluster_model.labels):
        sums[lab] += model.reconstruct_pair(c, t)
        counts[lab] += 1
    return sums / np.maximum(counts, 1)[:, None]


@dataclass
class ClusterEmbeddings:
    """Compact numerical identity of each cluster: PCA scores of centroids."""

    vectors: np.ndarray  # (K, d_k)
    pca: object

    @property
    def dim(self):
        return self.vectors.shape[1]

    def for_cluster(self, k):
        return self.vectors[k]

    def blend(self, weights):
        weights = np.asarray(weights, dtype=float)
        return weights @ self.vectors / weights.sum()


def cluster_embeddings(centroids, max_dim=8):
    centroids = np.atleast_2d(centroids)
    k = centroids.shape[0]
    d_k = min(max_dim, k)
    pca = pca_fit(centroids, d_k)
    return ClusterEmbeddings(vectors=pca.transform(centroids), pca=pca)


@dataclass
class E0FeatureSpec:
    """Polynomial plus trigonometric expansion of a normalized target e0."""

    e0_min: float
    e0_max: float

    def features(self, e0):
        e = (float(e0) - self.e0_min) / (self.e0_max - self.e0_min)
        pi_e = np.pi * e
        return np.array(
            [
                e,
                e**2,
                e**3,
                np.sin(pi_e),
                np.cos(pi_e),
                np.sin(2 * pi_e),
                np.cos(2 * pi_e),
            ]
        )


N_E0_FEATURES = 7


@dataclass
class NeuralTrajectory:
    net: Mlp
    embeddings: ClusterEmbeddings
    e0_spec: E0FeatureSpec
    train_mse: float = np.nan

    def reconstruct(self, e0_star, cluster=None, embedding=None):
        """Forward pass at a cluster id or at any blended embedding vector."""
        if embedding is None:
            if cluster is None:
                raise InsufficientData("need a cluster id or an embedding vector")
            embedding = self.embeddings.for_cluster(cluster)
        x = np.concatenate([np.asarray(embedding, dtype=float), self.e0_spec.features(e0_star)])
        return self.net.forward(x[None, :])[0]

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        state = self.net.state_dict()
        dims = state.pop("layer_dims")
        np.savez(directory / "net.npz", **state)
        np.save(directory / "embeddings.npy", self.embeddings.vectors)
        manifest = {
            "layer_dims": dims,
            "e0_min": self.e0_spec.e0_min,
            "e0_max": self.e0_spec.e0_max,
            "train_mse": None if np.isnan(self.train_mse) else self.train_mse,
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        with np.load(directory / "net.npz") as payload:
            state = dict(payload)
        state["layer_dims"] = manifest["layer_dims"]
        vectors = np.load(directory / "embeddings.npy")
        return cls(
            net=Mlp.from_state_dict(state),
            embeddings=ClusterEmbeddings(vectors=vectors, pca=None),
            e0_spec=E0FeatureSpec(manifest["e0_min"], manifest["e0_max"]),
            train_mse=manifest["train_mse"] if manifest["train_mse"] is not None else np.nan,
        )


def _blend_rows(emb, labels, e0s, z_rows, spec, n_blend, rng):
    """Convex-combination training rows between cluster pairs.

    A blend row pairs one observation from each of two clusters at a
    shared e0 (nearest rows to a draw from the overlap of their ranges)
    and mixes both the embeddings and the target schedules, teaching the
    network to interpolate smoothly between regimes.
    """
    k = emb.vectors.shape[0]
    by_cluster = {j: np.where(labels == j)[0] for j in range(k)}
    ranges = {
        j: (e0s[idx].min(), e0s[idx].max())
        for j, idx in by_cluster.items()
        if len(idx) > 0
    }
    pairs = [
        (i, j)
        for i in ranges
        for j in ranges
        if i < j and min(ranges[i][1], ranges[j][1]) > max(ranges[i][0], ranges[j][0])
    ]
    if not pairs:
        return None, None
    xs, ys = [], []
    for _ in range(n_blend):
        i, j = pairs[rng.integers(len(pairs))]
        lo = max(ranges[i][0], ranges[j][0])
        hi = min(ranges[i][1], ranges[j][1])
        e0 = rng.uniform(lo, hi)
        a = by_cluster[i][np.argmin(np.abs(e0s[by_cluster[i]] - e0))]
        b = by_cluster[j][np.argmin(np.abs(e0s[by_cluster[j]] - e0))]
        w = rng.uniform()
        e_mix = w * emb.vectors[i] + (1 - w) * emb.vectors[j]
        e0_mix = w * e0s[a] + (1 - w) * e0s[b]
        xs.append(np.concatenate([e_mix, spec.features(e0_mix)]))
        ys.append(w * z_rows[a] + (1 - w) * z_rows[b])
    return np.array(xs), np.array(ys)


def train_neural_trajectory(
    tensor,
    model,
    cluster_model,
    hidden=(256, 128),
    epochs=500,
    batch_size=512,
    learning_rate=1e-3,
    weight_decay=1e-4,
    embedding_jitter=0.1,
    blend_fraction=1.0,
    e0_summary="mean",
    rng=None,
):
    """Train the (cluster embedding, e0 features) -> schedule network.

    Two augmentations keep the embedding -> schedule map smooth between
    the K training embeddings: Gaussian jitter on the embedding block
    (``embedding_jitter`` is relative to the RMS inter-centroid
    distance) and convex-combination rows between cluster pairs
    (``blend_fraction`` of the real row count).
    """
    rng = np.random.default_rng(rng)
    cells = cluster_model.cells
    z_rows = np.array([model.reconstruct_pair(c, t) for c, t in cells])
    e0s = np.array([forward_e0(z, e0_summary) for z in z_rows])
    if len(cells) < 1000:
        warnings.warn(
            f"{len(cells)} training observations (< 1000); shrinking batch"
        )
        batch_size = min(batch_size, max(32, len(cells) // 4))

    centroids = cluster_centroids(tensor, model, cluster_model)
    emb = cluster_embeddings(centroids)
    spec = E0FeatureSpec(float(e0s.min()), float(e0s.max()))

    inputs = np.empty((len(cells), emb.dim + N_E0_FEATURES))
    for i, lab in enumerate(cluster_model.labels):
        inputs[i] = np.concatenate([emb.for_cluster(lab), spec.features(e0s[i])])

    train_x, train_y = inputs, z_rows
    if blend_fraction > 0 and emb.vectors.shape[0] > 1:
        bx, by = _blend_rows(
            emb, cluster_model.labels, e0s, z_rows, spec,
            int(blend_fraction * len(cells)), rng,
        )
        if bx is not None:
            train_x = np.vstack([train_x, bx])
            train_y = np.vstack([train_y, by])
    if embedding_jitter > 0 and emb.vectors.shape[0] > 1:
        diffs = [
            np.linalg.norm(emb.vectors[i] - emb.vectors[j])
            for i in range(emb.vectors.shape[0])
            for j in range(i + 1, emb.vectors.shape[0])
        ]
        sigma = embedding_jitter * float(np.sqrt(np.mean(np.square(diffs))))
        reps = 2
        train_x = np.tile(train_x, (reps, 1))
        train_y = np.tile(train_y, (reps, 1))
        train_x[:, : emb.dim] += rng.normal(0.0, sigma, size=(len(train_x), emb.dim))

    net = Mlp.init([emb.dim + N_E0_FEATURES, *hidden, z_rows.shape[1]], rng=rng)
    adam = AdamState.for_net(net, learning_rate=learning_rate)
    schedule = TrainSchedule(
        epochs=epochs, batch_size=batch_size, weight_decay=weight_decay
    )
    if epochs > 0:
        mlp_train(net, train_x, train_y, MseLoss(), adam, schedule, rng=rng)
    pred = net.forward(inputs)
    mse = float(np.mean((pred - z_rows) ** 2))
    return NeuralTrajectory(net=net, embeddings=emb, e0_spec=spec, train_mse=mse)
