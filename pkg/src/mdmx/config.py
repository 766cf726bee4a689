"""One structured configuration file covering every pipeline stage.

JSON on disk, validated on load: unknown keys are rejected so typos fail
loudly rather than silently falling back to defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidInput


@dataclass
class SynthSection:
    n_countries: int = 10
    n_years: int = 120
    start_year: int = 1900
    small_countries: tuple = (5,)
    include_disruptions: bool = True
    ragged_entry: bool = True
    noise_scale: float = 0.012
    wiggle_scale: float = 0.035


@dataclass
class DataSection:
    q_min: float = 1e-8
    n_ages: int = 110
    min_years: int = 5
    q_thresh: float = 0.005
    flat_age_pair: tuple = (105, 109)
    excluded_populations: tuple = ("FRACNP", "GBRCENW")
    imputed_weight: float = 0.0


@dataclass
class TuckerSection:
    tau: float = 0.9999
    weighting: bool = True
    smooth_age_basis: bool = True


@dataclass
class ClusterSection:
    k_min: int = 2
    k_max: int = 15
    k_override: int | None = None
    pca_target: float = 0.999
    gmm_restarts: int = 5
    epoch_window: int = 15
    epoch_delta: float = 0.05
    epoch_delta_rapid: float = 0.20


@dataclass
class TrajectorySection:
    n_nodes: int = 150
    lowess_frac: float = 0.3
    robust_iters: int = 1
    min_observations: int = 10
    e0_summary: str = "mean"
    nn_epochs: int = 500
    nn_hidden: tuple = (256, 128)
    nn_learning_rate: float = 1e-3
    nn_weight_decay: float = 1e-4
    nn_batch_size: int = 512


@dataclass
class DisruptionSection:
    baseline_method: str = "neural"
    core_hidden: tuple = (192, 192)
    core_epochs: int = 800
    sg_window: int = 11
    sg_degree: int = 3
    subcluster_min_size: int = 5


@dataclass
class FitterSection:
    sigma_lambda: float = 1.0
    gap_threshold: float = 0.0
    include_global_grid: bool = True


@dataclass
class SvdcompSection:
    c_age: int = 6
    alpha: float = 10.0
    epochs: int = 400
    patience: int = 30


@dataclass
class ForecastSection:
    n_pc: int = 5
    rho_min: float = 0.80
    rho_max: float = 0.999
    weights: tuple = (0.80, 0.00, 0.20)
    window: int = 20
    horizon: int = 15
    min_train: int = 30
    n_origins: int = 2
    kappa_floor: float = 1.0
    mle_max_iter: int = 40


@dataclass
class PipelineConfig:
    seed: int = 7
    synth: SynthSection = field(default_factory=SynthSection)
    data: DataSection = field(default_factory=DataSection)
    tucker: TuckerSection = field(default_factory=TuckerSection)
    cluster: ClusterSection = field(default_factory=ClusterSection)
    trajectory: TrajectorySection = field(default_factory=TrajectorySection)
    disruption: DisruptionSection = field(default_factory=DisruptionSection)
    fitter: FitterSection = field(default_factory=FitterSection)
    svdcomp: SvdcompSection = field(default_factory=SvdcompSection)
    forecast: ForecastSection = field(default_factory=ForecastSection)

    def to_dict(self):
        def convert(value):
            if dataclasses.is_dataclass(value):
                return {f.name: convert(getattr(value, f.name)) for f in dataclasses.fields(value)}
            if isinstance(value, tuple):
                return list(value)
            return value

        return convert(self)

    def config_hash(self):
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def from_dict(cls, payload):
        return _build(cls, payload, path="")

    @classmethod
    def load(cls, path):
        try:
            payload = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(payload)


def _build(klass, payload, path):
    if not isinstance(payload, dict):
        raise InvalidInput(f"config section {path or '<root>'} must be an object")
    fields = {f.name: f for f in dataclasses.fields(klass)}
    unknown = set(payload) - set(fields)
    if unknown:
        raise InvalidInput(
            f"unknown config key(s) {sorted(unknown)} in section {path or '<root>'}"
        )
    kwargs = {}
    for name, value in payload.items():
        f = fields[name]
        here = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(f.type) or (
            isinstance(f.default_factory, type) and dataclasses.is_dataclass(f.default_factory)
        ):
            kwargs[name] = _build(f.default_factory, value, here)
        elif isinstance(f.default, tuple) or (
            f.default is dataclasses.MISSING
            and f.default_factory is not dataclasses.MISSING
            and isinstance(f.default_factory(), tuple)
        ):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return klass(**kwargs)
