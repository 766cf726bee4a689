"""Exceptional-mortality modeling: counterfactual baselines, type profiles,
intensities, within-type sub-clustering, and the composable overlay model.

All disruption math lives on the logit scale, where adding lambda times a
unit profile multiplies the odds of dying by exp(lambda * profile) at
each sex-age cell.  Baselines estimate the schedule that would have been
observed without the event; the neural core variant never touches the
contaminated observation, so residuals are uncontaminated by design.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput, NoSupport, SingleProfileFallback
from .numerics import AdamState, Mlp, MseLoss, pca_fit, savitzky_golay, silhouette, ward_cluster
from .numerics.neural import TrainSchedule, mlp_train
from .numerics.smooth import lowess_multi

DISRUPTION_TYPES = {1: "war", 2: "respiratory", 3: "enteric"}


@dataclass
class BaselineEstimate:
    method: str  # naive | temporal | penalized | neural
    y_hat: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def kron_basis(model):
    """Stacked-schedule basis of the decomposition: kron(S, A), (2A, r1*r2).

    The column order matches the row-major vec of the effective core, so
    kron_basis(model) @ G_ct.reshape(-1) equals reconstruct_pair.
    """
    return np.kron(model.S, model.A)


def baseline_naive(model, y_obs):
    """Least-squares fit of the observation in the span of the sex-age basis.

    This is the projection baseline: it minimizes squared error over all
    2A cells at once, so a sharp disruption drags the whole estimate
    upward and leaves spurious negative residuals at unaffected ages.
    """
    b = kron_basis(model)
    w, *_ = np.linalg.lstsq(b, np.asarray(y_obs, dtype=float), rcond=None)
    return BaselineEstimate(method="naive", y_hat=b @ w, diagnostics={"weights": w})


def baseline_temporal(years, z_rows, t, lowess_frac=0.3):
    """Per-component smooth of ordinary-year reconstructions, read at year t.

    Requires ordinary years on both sides of ``t``; with fewer than 6
    anchor years it falls back to linear interpolation between the
    nearest flanking years.  The observed exceptional schedule is never
    an input.
    """
    years = np.asarray(years, dtype=float)
    z_rows = np.atleast_2d(np.asarray(z_rows, dtype=float))
    if len(years) < 3:
        raise NoSupport(f"only {len(years)} ordinary years for temporal baseline")
    before = years < t
    after = years > t
    if not before.any() or not after.any():
        raise NoSupport(f"no ordinary support on both sides of year {t}")
    if len(years) < 6:
        t_lo = years[before].max()
        t_hi = years[after].min()
        z_lo = z_rows[np.where(years == t_lo)[0][0]]
        z_hi = z_rows[np.where(years == t_hi)[0][0]]
        w = (t - t_lo) / (t_hi - t_lo)
        y_hat = (1 - w) * z_lo + w * z_hi
        return BaselineEstimate(
            method="temporal", y_hat=y_hat, diagnostics={"anchors": (t_lo, t_hi)}
        )
    y_hat = lowess_multi(years, z_rows, np.array([t]), frac=lowess_frac)[0]
    return BaselineEstimate(method="temporal", y_hat=y_hat, diagnostics={})


def baseline_penalized(model, y_obs, interp, alpha):
    """Projection shrunk toward the temporal interpolation.

    Minimizes |y - z|^2 + alpha * |z - interp|^2 over the basis span;
    alpha = 0 recovers the plain projection, alpha -> inf the projection
    of the interpolation.
    """
    if alpha < 0:
        raise InvalidInput("alpha must be nonnegative")
    b = kron_basis(model)
    target = (np.asarray(y_obs, dtype=float) + alpha * np.asarray(interp, dtype=float)) / (
        1.0 + alpha
    )
    w, *_ = np.linalg.lstsq(b, target, rcond=None)
    return BaselineEstimate(
        method="penalized", y_hat=b @ w, diagnostics={"alpha": alpha, "weights": w}
    )


N_YEAR_FEATURES = 9


def year_features(t, t_min, t_max):
    """Polynomial plus Fourier encoding of a calendar year on [0, 1]."""
    tt = (float(t) - t_min) / (t_max - t_min)
    return np.array(
        [
            tt,
            tt**2,
            tt**3,
            np.sin(2 * np.pi * tt),
            np.cos(2 * np.pi * tt),
            np.sin(4 * np.pi * tt),
            np.cos(4 * np.pi * tt),
            np.sin(10 * np.pi * tt),
            np.cos(10 * np.pi * tt),
        ]
    )


@dataclass
class NeuralCore:
    """Network predicting the effective core slice from country loading and
    raw year features (never the contaminated year loadings)."""

    net: Mlp
    t_min: float
    t_max: float
    r1: int
    r2: int
    train_mse: float = np.nan

    def predict_core(self, country_loading, year):
        x = np.concatenate(
            [np.asarray(country_loading, dtype=float), year_features(year, self.t_min, self.t_max)]
        )
        return self.net.forward(x[None, :])[0].reshape(self.r1, self.r2)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        state = self.net.state_dict()
        dims = state.pop("layer_dims")
        np.savez(directory / "net.npz", **state)
        manifest = {
            "layer_dims": dims,
            "t_min": self.t_min,
            "t_max": self.t_max,
            "r1": self.r1,
            "r2": self.r2,
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
        return cls(
            net=Mlp.from_state_dict(state),
            t_min=manifest["t_min"],
            t_max=manifest["t_max"],
            r1=manifest["r1"],
            r2=manifest["r2"],
            train_mse=manifest["train_mse"] if manifest["train_mse"] is not None else np.nan,
        )


def train_neural_core(
    model,
    tensor,
    hidden=(192, 192),
    epochs=800,
    batch_size=256,
    learning_rate=1e-3,
    weight_decay=1e-4,
    rng=None,
):
    """Fit the neural core on observed ordinary cells.

    Targets are direct projections of the observed slices onto the sex
    and age bases (not the truncated core slices, which carry round-trip
    error from the country/year truncation).
    """
    rng = np.random.default_rng(rng)
    cells = tensor.observed_cells()
    t_min, t_max = float(tensor.years.min()), float(tensor.years.max())
    r1, r2 = model.ranks[0], model.ranks[1]
    inputs = np.empty((len(cells), model.ranks[2] + N_YEAR_FEATURES))
    targets = np.empty((len(cells), r1 * r2))
    for i, (c, t) in enumerate(cells):
        inputs[i, : model.ranks[2]] = model.C[c]
        inputs[i, model.ranks[2] :] = year_features(tensor.years[t], t_min, t_max)
        slice_ct = tensor.values[:, :, c, t]
        targets[i] = (model.S.T @ slice_ct @ model.A).reshape(-1)
    net = Mlp.init([inputs.shape[1], *hidden, r1 * r2], rng=rng)
    adam = AdamState.for_net(net, learning_rate=learning_rate)
    mlp_train(
        net,
        inputs,
        targets,
        MseLoss(),
        adam,
        TrainSchedule(epochs=epochs, batch_size=batch_size, weight_decay=weight_decay),
        rng=rng,
    )
    mse = float(np.mean((net.forward(inputs) - targets) ** 2))
    return NeuralCore(net=net, t_min=t_min, t_max=t_max, r1=r1, r2=r2, train_mse=mse)


def baseline_neural(core, model, c, year):
    """Counterfactual schedule from the neural core at one country-year."""
    g_hat = core.predict_core(model.C[c], year)
    y_hat = (model.S @ g_hat @ model.A.T).reshape(-1)
    return BaselineEstimate(
        method="neural", y_hat=y_hat, diagnostics={"core_slice": g_hat}
    )


def residuals(y_obs, baseline):
    """Observed minus baseline on the logit scale; exp of a residual is the
    odds ratio of observed to counterfactual mortality at that cell."""
    y_hat = baseline.y_hat if isinstance(baseline, BaselineEstimate) else baseline
    return np.asarray(y_obs, dtype=float) - np.asarray(y_hat, dtype=float)


def _sg_per_half(vec, window, degree):
    half = len(vec) // 2
    out = np.empty_like(vec)
    out[:half] = savitzky_golay(vec[:half], window, degree, preserve_edges=True)
    out[half:] = savitzky_golay(vec[half:], window, degree, preserve_edges=True)
    return out


@dataclass
class DisruptionProfile:
    label: int
    raw: np.ndarray  # unit vector
    smoothed: np.ndarray  # unit vector, per-sex-half low-pass filtered
    cosine: float
    n_events: int
    sg_window: int = 11
    sg_degree: int = 3


def estimate_profile(residual_rows, label=0, window=11, degree=3):
    """Mean residual, normalized, low-pass filtered per sex half, renormalized."""
    rows = np.atleast_2d(np.asarray(residual_rows, dtype=float))
    mean = rows.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        raise InvalidInput("mean residual is identically zero")
    raw = mean / norm
    smoothed = _sg_per_half(raw, window, degree)
    smoothed = smoothed / np.linalg.norm(smoothed)
    return DisruptionProfile(
        label=label,
        raw=raw,
        smoothed=smoothed,
        cosine=float(raw @ smoothed),
        n_events=rows.shape[0],
        sg_window=window,
        sg_degree=degree,
    )


def estimate_profiles(residuals_by_type, window=11, degree=3):
    """Per-type profiles from residual rows grouped by disruption label."""
    out = {}
    for label, rows in residuals_by_type.items():
        if len(rows) == 0:
            continue
        out[label] = estimate_profile(rows, label=label, window=window, degree=degree)
    return out


def estimate_intensity(residual, profile):
    """Projection of a residual onto a unit profile: (intensity, remainder)."""
    delta = profile.smoothed if isinstance(profile, DisruptionProfile) else np.asarray(profile)
    if abs(np.linalg.norm(delta) - 1.0) > 1e-9:
        raise InvalidInput("profile must have unit norm")
    r = np.asarray(residual, dtype=float)
    lam = float(r @ delta)
    return lam, r - lam * delta


@dataclass
class SubClustering:
    label: int
    n_subclusters: int
    member_labels: np.ndarray
    profiles: np.ndarray  # (K_d, 2A) unit, smoothed, sign-fixed
    embeddings: np.ndarray  # (K_d, d')
    silhouette: float
    net: Mlp | None = None

    def profile_for(self, k):
        return self.profiles[k]

    def profile_from_embedding(self, embedding):
        if self.net is None:
            raise InvalidInput("no embedding network trained")
        out = self.net.forward(np.asarray(embedding, dtype=float)[None, :])[0]
        return out / np.linalg.norm(out)


def subcluster(
    residual_rows,
    label=0,
    k_range=range(2, 8),
    min_size=5,
    pca_components=20,
    window=11,
    degree=3,
    train_embedding_net=True,
    rng=None,
):
    """Ward sub-clustering of one type's residuals, silhouette-selected.

    Raises SingleProfileFallback when the members cannot support at least
    two sub-clusters of ``min_size`` or are degenerate (identical rows).
    """
    rows = np.atleast_2d(np.asarray(residual_rows, dtype=float))
    n = rows.shape[0]
    if n < 2 * min_size:
        raise SingleProfileFallback(f"{n} members cannot fill two sub-clusters of {min_size}")
    if np.allclose(rows.std(axis=0), 0.0):
        raise SingleProfileFallback("all members identical; silhouette undefined")
    rng = np.random.default_rng(rng)

    n_comp = min(pca_components, n - 1, rows.shape[1])
    pca = pca_fit(rows, n_comp)
    scores = pca.transform(rows)

    best = None
    for k in k_range:
        if k > n:
            continue
        labels = ward_cluster(scores, k)
        sizes = np.bincount(labels, minlength=k)
        if sizes.min() < min_size:
            continue
        score = silhouette(scores, labels)
        if best is None or score > best[0]:
            best = (score, k, labels)
    if best is None:
        raise SingleProfileFallback("no sub-cluster count satisfies the size floor")
    sil, k, labels = best

    profiles = np.empty((k, rows.shape[1]))
    for j in range(k):
        members = rows[labels == j]
        prof = estimate_profile(members, label=label, window=window, degree=degree).smoothed
        # positive intensity must mean excess mortality
        if (members @ prof).mean() < 0:
            prof = -prof
        profiles[j] = prof

    emb_dim = min(k, 4)
    emb_pca = pca_fit(profiles, emb_dim)
    embeddings = emb_pca.transform(profiles)

    net = None
    if train_embedding_net:
        net = Mlp.init([emb_dim, 32, rows.shape[1]], rng=rng)
        adam = AdamState.for_net(net, learning_rate=1e-2)
        mlp_train(
            net,
            embeddings,
            profiles,
            MseLoss(),
            adam,
            TrainSchedule(epochs=1500, batch_size=max(2, k), weight_decay=1e-6),
            rng=rng,
        )
    return SubClustering(
        label=label,
        n_subclusters=k,
        member_labels=labels,
        profiles=profiles,
        embeddings=embeddings,
        silhouette=float(sil),
        net=net,
    )


def apply_disruption(base, profile, lam):
    """Logit-additive overlay of one disruption term."""
    if lam < 0:
        raise InvalidInput("intensity must be nonnegative in the overlay")
    delta = profile.smoothed if isinstance(profile, DisruptionProfile) else np.asarray(profile)
    return np.asarray(base, dtype=float) + lam * delta


def compose(base, terms):
    """Sum of several disruption overlays on one baseline."""
    out = np.asarray(base, dtype=float).copy()
    for profile, lam in terms:
        out = apply_disruption(out, profile, lam)
    return out


@dataclass
class DisruptionModel:
    """Everything the generator and fitter need about exceptional mortality."""

    profiles: dict  # label -> DisruptionProfile
    intensities: dict  # (c, t) -> (label, lambda_signed)
    subclusterings: dict = field(default_factory=dict)  # label -> SubClustering
    neural_core: NeuralCore | None = None
    baseline_method: str = "neural"
    residuals: dict = field(default_factory=dict)  # (c, t) -> residual row (not serialized)

    def profile_vector(self, label, subcluster_id=None):
        if label not in self.profiles:
            raise InvalidInput(f"unknown disruption type {label}")
        if subcluster_id is None:
            return self.profiles[label].smoothed
        sc = self.subclusterings.get(label)
        if sc is None:
            raise InvalidInput(f"type {label} has no sub-clustering")
        if not (0 <= subcluster_id < sc.n_subclusters):
            raise InvalidInput(f"sub-cluster {subcluster_id} out of range")
        return sc.profile_for(subcluster_id)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        labels = sorted(self.profiles)
        for lab in labels:
            p = self.profiles[lab]
            np.save(directory / f"profile_{lab}_raw.npy", p.raw)
            np.save(directory / f"profile_{lab}_smoothed.npy", p.smoothed)
        for lab, sc in self.subclusterings.items():
            np.save(directory / f"subprofiles_{lab}.npy", sc.profiles)
            np.save(directory / f"subembeddings_{lab}.npy", sc.embeddings)
            np.save(directory / f"sublabels_{lab}.npy", sc.member_labels)
            if sc.net is not None:
                state = sc.net.state_dict()
                dims = state.pop("layer_dims")
                np.savez(directory / f"subnet_{lab}.npz", **state)
                (directory / f"subnet_{lab}_dims.json").write_text(json.dumps(dims))
        if self.neural_core is not None:
            self.neural_core.save(directory / "neural_core")
        manifest = {
            "baseline_method": self.baseline_method,
            "profiles": {
                str(lab): {
                    "cosine": self.profiles[lab].cosine,
                    "n_events": self.profiles[lab].n_events,
                    "sg_window": self.profiles[lab].sg_window,
                    "sg_degree": self.profiles[lab].sg_degree,
                }
                for lab in labels
            },
            "subclusterings": {
                str(lab): {
                    "n_subclusters": sc.n_subclusters,
                    "silhouette": sc.silhouette,
                }
                for lab, sc in self.subclusterings.items()
            },
            "intensities": [
                [int(c), int(t), int(lab), float(lam)]
                for (c, t), (lab, lam) in sorted(self.intensities.items())
            ],
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        profiles = {}
        for lab_str, meta in manifest["profiles"].items():
            lab = int(lab_str)
            raw = np.load(directory / f"profile_{lab}_raw.npy")
            smoothed = np.load(directory / f"profile_{lab}_smoothed.npy")
            profiles[lab] = DisruptionProfile(
                label=lab,
                raw=raw,
                smoothed=smoothed,
                cosine=meta["cosine"],
                n_events=meta["n_events"],
                sg_window=meta["sg_window"],
                sg_degree=meta["sg_degree"],
            )
        subclusterings = {}
        for lab_str, meta in manifest.get("subclusterings", {}).items():
            lab = int(lab_str)
            net = None
            net_path = directory / f"subnet_{lab}.npz"
            if net_path.exists():
                with np.load(net_path) as payload:
                    state = dict(payload)
                state["layer_dims"] = json.loads(
                    (directory / f"subnet_{lab}_dims.json").read_text()
                )
                net = Mlp.from_state_dict(state)
            subclusterings[lab] = SubClustering(
                label=lab,
                n_subclusters=meta["n_subclusters"],
                member_labels=np.load(directory / f"sublabels_{lab}.npy"),
                profiles=np.load(directory / f"subprofiles_{lab}.npy"),
                embeddings=np.load(directory / f"subembeddings_{lab}.npy"),
                silhouette=meta["silhouette"],
                net=net,
            )
        neural_core = None
        if (directory / "neural_core").exists():
            neural_core = NeuralCore.load(directory / "neural_core")
        intensities = {
            (c, t): (lab, lam) for c, t, lab, lam in manifest.get("intensities", [])
        }
        return cls(
            profiles=profiles,
            intensities=intensities,
            subclusterings=subclusterings,
            neural_core=neural_core,
            baseline_method=manifest["baseline_method"],
        )


def fit_disruption_model(
    model,
    tensor,
    baseline_method="neural",
    neural_core_kwargs=None,
    subcluster_min_size=5,
    sg_window=11,
    sg_degree=3,
    rng=None,
):
    """End-to-end exceptional-mortality fit over the tensor's masked cells."""
    rng = np.random.default_rng(rng)
    core = None
    if baseline_method == "neural":
        core = train_neural_core(model, tensor, rng=rng, **(neural_core_kwargs or {}))

    resid_by_type = {}
    cells_by_type = {}
    resid_by_cell = {}
    for (c, t), y_obs in sorted(tensor.exceptional.items()):
        label = int(tensor.disruption[c, t])
        if baseline_method == "neural":
            base = baseline_neural(core, model, c, tensor.years[t])
        else:
            base = baseline_naive(model, y_obs)
        r = residuals(y_obs, base)
        resid_by_type.setdefault(label, []).append(r)
        cells_by_type.setdefault(label, []).append((c, t))
        resid_by_cell[(c, t)] = r

    profiles = estimate_profiles(resid_by_type, window=sg_window, degree=sg_degree)

    intensities = {}
    for label, rows in resid_by_type.items():
        prof = profiles[label]
        for (c, t), r in zip(cells_by_type[label], rows):
            lam, _ = estimate_intensity(r, prof)
            intensities[(c, t)] = (label, lam)

    subclusterings = {}
    for label, rows in resid_by_type.items():
        try:
            subclusterings[label] = subcluster(
                rows,
                label=label,
                min_size=subcluster_min_size,
                window=sg_window,
                degree=sg_degree,
                rng=rng,
            )
        except SingleProfileFallback as exc:
            warnings.warn(f"type {label}: {exc}; keeping the single profile")

    return DisruptionModel(
        profiles=profiles,
        intensities=intensities,
        subclusterings=subclusterings,
        neural_core=core,
        baseline_method=baseline_method,
        residuals=resid_by_cell,
    )
