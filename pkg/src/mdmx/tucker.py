"""Weighted higher-order SVD of the 4-way logit-mortality tensor.

Axes are (sex, age, country, year) throughout; modes are numbered 1..4.
Factor matrices keep orthonormal columns, the sex mode stays at full rank,
and each factor column is sign-fixed so its largest-magnitude entry is
positive (plain SVD leaves the sign ambiguous, which would break stored
fixtures between runs).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DecompositionError, InvalidInput
from .numerics import qr_orthonormalize, thin_svd
from .numerics.smooth import gaussian_smooth_varbw


def unfold(tensor, mode):
    """Mode-n unfolding: mode axis becomes rows, remaining axes (in
    ascending index order, last varying fastest) become columns."""
    tensor = np.asarray(tensor)
    if not 1 <= mode <= tensor.ndim:
        raise InvalidInput(f"mode {mode} outside 1..{tensor.ndim}")
    return np.moveaxis(tensor, mode - 1, 0).reshape(tensor.shape[mode - 1], -1)


def fold(matrix, mode, shape):
    """Exact inverse of :func:`unfold` for a tensor of the given shape."""
    shape = tuple(shape)
    rest = shape[: mode - 1] + shape[mode:]
    arr = np.asarray(matrix).reshape((shape[mode - 1],) + rest)
    return np.moveaxis(arr, 0, mode - 1)


def n_mode_product(tensor, matrix, mode):
    """Contract ``tensor`` along ``mode`` with ``matrix`` (J x I_mode)."""
    out = np.tensordot(np.asarray(tensor), np.asarray(matrix), axes=(mode - 1, 1))
    return np.moveaxis(out, -1, mode - 1)


def select_rank(singular_values, tau, min_rank=1, max_rank=None):
    """Smallest rank whose cumulative squared-spectrum fraction reaches tau,
    clamped to [min_rank, max_rank]."""
    sv = np.asarray(singular_values, dtype=float)
    total = (sv**2).sum()
    if total <= 0:
        r = 1
    else:
        cum = np.cumsum(sv**2) / total
        r = int(np.searchsorted(cum, tau - 1e-12) + 1)
        r = min(r, len(sv))
    r = max(r, int(min_rank))
    if max_rank is not None:
        r = min(r, int(max_rank))
    return min(r, len(sv))


@dataclass
class RankPolicy:
    """Variance threshold and per-mode rank bounds for the decomposition."""

    tau: float = 0.9999
    min_ranks: tuple = (1, 1, 1, 1)
    max_ranks: tuple = (None, None, None, None)

    def __post_init__(self):
        if not (0.0 < self.tau <= 1.0):
            raise InvalidInput(f"tau {self.tau} outside (0, 1]")


@dataclass
class ComponentSmoothing:
    x_ramp: float = 40.0
    s_min: float = 0.25
    sigma_max: float = 2.0


@dataclass
class AgeSmoothingSpec:
    """Per-component bandwidths for smoothing the age basis.

    Component 1 (the mean age shape) is never smoothed; components 2..5
    get individual kernels and everything beyond shares one wider kernel.
    The first ``n_preserved`` ages are restored to their raw values after
    smoothing: the infant-to-childhood drop is a genuine discontinuity.
    """

    per_component: dict = field(
        default_factory=lambda: {
            2: ComponentSmoothing(40.0, 0.25, 1.5),
            3: ComponentSmoothing(40.0, 0.25, 2.0),
            4: ComponentSmoothing(40.0, 0.25, 2.0),
            5: ComponentSmoothing(40.0, 0.25, 2.5),
        }
    )
    shared_tail: ComponentSmoothing = field(
        default_factory=lambda: ComponentSmoothing(40.0, 0.25, 4.0)
    )
    n_preserved: int = 2
    ortho_tol: float = 1e-10

    def kernel_for(self, component):
        if component < 2:
            return None
        return self.per_component.get(component, self.shared_tail)

    def to_dict(self):
        return {
            "per_component": {
                str(k): [v.x_ramp, v.s_min, v.sigma_max]
                for k, v in self.per_component.items()
            },
            "shared_tail": [
                self.shared_tail.x_ramp,
                self.shared_tail.s_min,
                self.shared_tail.sigma_max,
            ],
            "n_preserved": self.n_preserved,
            "ortho_tol": self.ortho_tol,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            per_component={
                int(k): ComponentSmoothing(*v) for k, v in d["per_component"].items()
            },
            shared_tail=ComponentSmoothing(*d["shared_tail"]),
            n_preserved=d["n_preserved"],
            ortho_tol=d["ortho_tol"],
        )


@dataclass
class TuckerModel:
    """Factor matrices, core tensor, and per-mode spectra."""

    S: np.ndarray  # (2, r1)
    A: np.ndarray  # (n_ages, r2)
    C: np.ndarray  # (n_countries, r3)
    T: np.ndarray  # (n_years, r4)
    core: np.ndarray  # (r1, r2, r3, r4)
    spectra: list  # full singular values per mode
    tau: float
    smoothing: AgeSmoothingSpec | None = None

    @property
    def ranks(self):
        return self.core.shape

    @property
    def factors(self):
        return (self.S, self.A, self.C, self.T)

    def reconstruct_tensor(self):
        out = self.core
        for mode, factor in enumerate(self.factors, start=1):
            out = n_mode_product(out, factor, mode)
        return out

    def effective_core(self, c, t):
        """Core contracted with one country row and one year row: (r1, r2)."""
        return np.einsum("sact,c,t->sa", self.core, self.C[c], self.T[t])

    def reconstruct_pair(self, c, t, reduced_ranks=None):
        """Stacked logit schedule (female block then male block) at (c, t)."""
        if reduced_ranks is None:
            g_ct = self.effective_core(c, t)
            return (self.S @ g_ct @ self.A.T).reshape(-1)
        r1, r2, r3, r4 = self._check_reduced(reduced_ranks)
        g = self.core[:r1, :r2, :r3, :r4]
        g_ct = np.einsum("sact,c,t->sa", g, self.C[c, :r3], self.T[t, :r4])
        return (self.S[:, :r1] @ g_ct @ self.A[:, :r2].T).reshape(-1)

    def reconstruct(self, s, c, t, reduced_ranks=None):
        """Single-sex logit schedule of length n_ages at (s, c, t)."""
        pair = self.reconstruct_pair(c, t, reduced_ranks)
        n_ages = self.A.shape[0]
        return pair[s * n_ages : (s + 1) * n_ages]

    def _check_reduced(self, reduced_ranks):
        rr = tuple(int(r) for r in reduced_ranks)
        if len(rr) != 4 or any(r < 1 for r in rr):
            raise InvalidInput("reduced_ranks must be four positive ints")
        if any(r > full for r, full in zip(rr, self.ranks)):
            raise InvalidInput(f"reduced ranks {rr} exceed model ranks {self.ranks}")
        return rr

    def variance_fractions(self):
        """Retained squared-spectrum fraction per mode."""
        out = []
        for sv, r in zip(self.spectra, self.ranks):
            total = (sv**2).sum()
            out.append(float((sv[:r] ** 2).sum() / total) if total > 0 else 1.0)
        return out

    def save(self, directory, provenance=None):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        arrays = {"S": self.S, "A": self.A, "C": self.C, "T": self.T, "core": self.core}
        for i, sv in enumerate(self.spectra):
            arrays[f"spectrum_{i}"] = sv
        for name, arr in arrays.items():
            np.save(directory / f"{name}.npy", arr)
        manifest = {
            "ranks": [int(r) for r in self.ranks],
            "tau": self.tau,
            "smoothing": None if self.smoothing is None else self.smoothing.to_dict(),
            "dims": {
                "sexes": int(self.S.shape[0]),
                "ages": int(self.A.shape[0]),
                "countries": int(self.C.shape[0]),
                "years": int(self.T.shape[0]),
            },
            "variance_fractions": self.variance_fractions(),
        }
        if provenance:
            manifest["provenance"] = provenance
        (directory / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True)
        )

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        load = lambda name: np.load(directory / f"{name}.npy")
        smoothing = manifest.get("smoothing")
        return cls(
            S=load("S"),
            A=load("A"),
            C=load("C"),
            T=load("T"),
            core=load("core"),
            spectra=[load(f"spectrum_{i}") for i in range(4)],
            tau=manifest["tau"],
            smoothing=None if smoothing is None else AgeSmoothingSpec.from_dict(smoothing),
        )


def _fix_signs(u):
    """Flip columns so each one's largest-magnitude entry is positive."""
    u = u.copy()
    for j in range(u.shape[1]):
        i = np.argmax(np.abs(u[:, j]))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
    return u


def hosvd(tensor, policy=None, weighting=False):
    """Higher-order SVD with variance-threshold rank selection.

    ``tensor`` is either a raw (2, A, C, T) array or an object exposing
    ``values`` and ``imputation_weight``.  With ``weighting`` the per-mode
    SVDs run on the tensor scaled cell-wise by the (country, year)
    imputation weight, so low-weight (imputed) cells barely influence the
    bases; the core projection always uses the unweighted tensor.
    The sex mode keeps full rank.
    """
    if hasattr(tensor, "values"):
        values = np.asarray(tensor.values, dtype=float)
        weight_ct = getattr(tensor, "imputation_weight", None)
    else:
        values = np.asarray(tensor, dtype=float)
        weight_ct = None
    if values.ndim != 4:
        raise InvalidInput(f"expected a 4-way tensor, got ndim={values.ndim}")
    policy = policy or RankPolicy()

    if weighting:
        if weight_ct is None:
            raise InvalidInput("weighting requested but tensor carries no weights")
        svd_input = values * np.asarray(weight_ct, dtype=float)[None, None, :, :]
    else:
        svd_input = values

    factors = []
    spectra = []
    for mode in range(1, 5):
        m = unfold(svd_input, mode)
        if not np.any(m):
            raise DecompositionError(f"mode-{mode} unfolding is all zero")
        u, sv, _ = thin_svd(m)
        spectra.append(sv)
        if mode == 1:
            r = values.shape[0]  # sex dimension kept at full rank
        else:
            r = select_rank(
                sv,
                policy.tau,
                policy.min_ranks[mode - 1],
                policy.max_ranks[mode - 1],
            )
        factors.append(_fix_signs(u[:, :r]))

    core = values
    for mode, factor in enumerate(factors, start=1):
        core = n_mode_product(core, factor.T, mode)

    return TuckerModel(
        S=factors[0],
        A=factors[1],
        C=factors[2],
        T=factors[3],
        core=core,
        spectra=spectra,
        tau=policy.tau,
    )


def _recompute_core(model, values):
    core = values
    for mode, factor in enumerate(model.factors, start=1):
        core = n_mode_product(core, factor.T, mode)
    return core


def smooth_age_basis(model, spec=None, tensor=None):
    """Smooth the higher-order age basis columns, then restore orthonormality.

    Returns a new model; the original is untouched.  When ``tensor`` (raw
    values or MortalityTensor) is given the core is recomputed against it,
    otherwise against the model's own full-rank reconstruction.
    """
    spec = spec or AgeSmoothingSpec()
    a = model.A.copy()
    n_ages, r2 = a.shape
    changed = False
    for j in range(1, r2):  # skip the first component
        kern = spec.kernel_for(j + 1)
        if kern is None or kern.sigma_max == 0:
            continue
        raw = a[:, j].copy()
        smoothed = gaussian_smooth_varbw(raw, kern.x_ramp, kern.s_min, kern.sigma_max)
        smoothed[: spec.n_preserved] = raw[: spec.n_preserved]
        a[:, j] = smoothed
        changed = True
    if not changed:
        return TuckerModel(
            S=model.S,
            A=model.A,
            C=model.C,
            T=model.T,
            core=model.core,
            spectra=model.spectra,
            tau=model.tau,
            smoothing=spec,
        )

    ortho_err = np.max(np.abs(a.T @ a - np.eye(r2)))
    if ortho_err > spec.ortho_tol:
        a = _fix_signs(qr_orthonormalize(a))

    if tensor is None:
        values = model.reconstruct_tensor()
    elif hasattr(tensor, "values"):
        values = np.asarray(tensor.values, dtype=float)
    else:
        values = np.asarray(tensor, dtype=float)

    new_model = TuckerModel(
        S=model.S,
        A=a,
        C=model.C,
        T=model.T,
        core=model.core,
        spectra=model.spectra,
        tau=model.tau,
        smoothing=spec,
    )
    new_model.core = _recompute_core(new_model, values)
    return new_model


def level_residual_split(model, c, t):
    """Reconstruction split into the level term (first age component) and
    the age-specific remainder; the two sum exactly to the full pair."""
    g_ct = model.effective_core(c, t)
    level = np.outer(model.S @ g_ct[:, 0], model.A[:, 0]).reshape(-1)
    g_rest = g_ct.copy()
    g_rest[:, 0] = 0.0
    residual = (model.S @ g_rest @ model.A.T).reshape(-1)
    return level, residual
