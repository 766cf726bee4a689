"""Synthetic mortality world with planted low-rank structure.

Generates Gompertz-Makeham-flavored logit(qx) surfaces built from a
small set of smooth age shapes whose coefficients move linearly with a
per-country development index.  Countries belong to one of a few
age-pattern archetypes (level-independent shape deviations), small
populations get Poisson death counts (producing the zero-rate valley
cells that exercise adaptive pooling), and war / respiratory / enteric
disruptions are overlaid as scaled unit profiles and recorded in a
matching event dictionary.  The planted truth is returned for tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lifetable import expit, mx_from_qx
from .events import Event, EventDictionary
from .ingest import CountsRecord, RawSeries, TableRecord


@dataclass
class DisruptionPlan:
    kind: str  # war | respiratory | enteric
    years: tuple  # inclusive (start, end), absolute
    countries: list  # country indices
    intensity: tuple = (0.8, 2.5)  # sampled uniformly per (country, year)


@dataclass
class SynthConfig:
    n_countries: int = 10
    n_years: int = 120
    start_year: int = 1900
    n_ages: int = 110
    seed: int = 7
    n_archetypes: int = 3
    small_countries: tuple = (5,)  # indices drawing Poisson deaths
    small_size: float = 1.2e5
    large_size: float = 5e6
    noise_scale: float = 0.012  # iid logit noise for large countries
    wiggle_scale: float = 0.035  # AR(1) shape wiggle per country-year
    include_disruptions: bool = True
    ragged_entry: bool = True  # stagger country start years
    static_development: float | None = None  # pin the development index
    archetype_jitter: float = 0.04  # per-country spread within an archetype
    wiggle_ar: float = 0.85  # autocorrelation of the year-to-year shape wiggle
    timing_jitter: float = 0.06  # per-country offset of the development index
    disruptions: list = None

    def __post_init__(self):
        if self.disruptions is None and self.include_disruptions:
            y0 = self.start_year
            self.disruptions = [
                DisruptionPlan("war", (y0 + 44, y0 + 48), [0, 1, 2, 3]),
                DisruptionPlan("respiratory", (y0 + 48, y0 + 49), list(range(self.n_countries))),
                DisruptionPlan("war", (y0 + 69, y0 + 74), [0, 2, 4]),
                DisruptionPlan("enteric", (y0 + 25, y0 + 26), [2, 4]),
                DisruptionPlan("respiratory", (y0 + 87, y0 + 88), list(range(self.n_countries))),
            ]
        elif self.disruptions is None:
            self.disruptions = []


@dataclass
class SynthTruth:
    """Planted quantities kept for oracle-style tests."""

    archetypes: np.ndarray  # per-country archetype id
    development: np.ndarray  # (C, T) index in [0, 1]
    profiles: dict  # kind -> unit 2A profile
    intensities: dict  # (country_idx, year) -> (kind, lambda)
    baseline_z: np.ndarray  # (2, A, C, T) noise-free baseline logit
    populations: list
    years: np.ndarray


def _age_shapes(n_ages):
    a = np.arange(n_ages, dtype=float)
    shapes = {
        "infant": np.exp(-a / 1.8),
        "child": np.exp(-a / 8.0),
        "hump": np.exp(-0.5 * ((a - 22.0) / 7.0) ** 2),
        "gomp": np.maximum(a - 30.0, 0.0) / 79.0,
        "oldcurve": (np.maximum(a - 50.0, 0.0) / 59.0) ** 2,
    }
    return shapes


def disruption_profile(kind, n_ages):
    """Unit-norm stacked (female, male) excess-mortality shape."""
    a = np.arange(n_ages, dtype=float)
    if kind == "war":
        male = np.exp(-0.5 * ((a - 25.0) / 8.0) ** 2)
        female = 0.15 * np.exp(-0.5 * ((a - 30.0) / 12.0) ** 2)
    elif kind == "respiratory":
        broad = np.exp(-0.5 * ((a - 30.0) / 25.0) ** 2) + 0.8 * np.exp(
            -0.5 * ((a - 80.0) / 12.0) ** 2
        )
        female = broad
        male = 1.1 * broad
    elif kind == "enteric":
        child = np.exp(-0.5 * ((a - 3.0) / 4.0) ** 2) + 0.45 * np.exp(
            -0.5 * ((a - 25.0) / 15.0) ** 2
        )
        female = child
        male = child
    else:
        raise ValueError(f"unknown disruption kind {kind!r}")
    prof = np.concatenate([female, male])
    return prof / np.linalg.norm(prof)


KIND_LABEL = {"war": 1, "respiratory": 2, "enteric": 3}


def _archetype_coefficients(arch, rng, jitter_scale=0.04):
    """Shape-deviation coefficients for one country of a given archetype."""
    base = {
        0: {"hump_m": 0.55, "hump_f": 0.18, "oldcurve": -0.30, "child": 0.0},
        1: {"hump_m": 0.0, "hump_f": 0.0, "oldcurve": 0.05, "child": 0.75},
        2: {"hump_m": -0.35, "hump_f": -0.10, "oldcurve": 0.55, "child": -0.15},
    }[arch % 3]
    jitter = {k: rng.normal(0.0, jitter_scale) for k in base}
    return {k: base[k] + jitter[k] for k in base}


def synthesize(cfg=None):
    """Generate (RawSeries with counts, EventDictionary, SynthTruth)."""
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    n_ages = cfg.n_ages
    shapes = _age_shapes(n_ages)
    pops = [f"C{idx:02d}" for idx in range(cfg.n_countries)]
    years = np.arange(cfg.start_year, cfg.start_year + cfg.n_years)

    # staggered entry produces the ragged observed mask
    if cfg.ragged_entry:
        offsets = [
            0 if c < max(2, cfg.n_countries // 2) else int(rng.integers(0, cfg.n_years // 6))
            for c in range(cfg.n_countries)
        ]
    else:
        offsets = [0] * cfg.n_countries

    archetypes = np.array([c % cfg.n_archetypes for c in range(cfg.n_countries)])
    coeffs = [_archetype_coefficients(arch, rng, cfg.archetype_jitter) for arch in archetypes]
    timing = rng.uniform(-cfg.timing_jitter, cfg.timing_jitter, size=cfg.n_countries)

    development = np.zeros((cfg.n_countries, cfg.n_years))
    baseline = np.zeros((2, n_ages, cfg.n_countries, cfg.n_years))

    wiggle_channels = ("hump_m", "hump_f", "oldcurve", "child")
    for c in range(cfg.n_countries):
        # AR(1) wiggle on every archetype shape channel
        wig = {ch: np.zeros(cfg.n_years) for ch in wiggle_channels}
        for ch in wiggle_channels:
            for t in range(1, cfg.n_years):
                wig[ch][t] = cfg.wiggle_ar * wig[ch][t - 1] + rng.normal(0, cfg.wiggle_scale)
        for t in range(cfg.n_years):
            if cfg.static_development is not None:
                x = np.clip(cfg.static_development + timing[c], 0.02, 0.98)
            else:
                x = np.clip((t + 20.0) / (cfg.n_years + 40.0) + timing[c], 0.02, 0.98)
            development[c, t] = x
            level = -5.3 - 2.5 * x
            ic = 4.0 - 1.9 * x
            cc = 1.15 * (1.0 - x)
            gc = 4.9 + 2.35 * x
            co = coeffs[c]
            common = (
                level
                + ic * shapes["infant"]
                + (cc + co["child"] + wig["child"][t]) * shapes["child"]
                + gc * shapes["gomp"]
                + (co["oldcurve"] + wig["oldcurve"][t]) * shapes["oldcurve"]
            )
            sex_gap = 0.35 + 0.2 * np.sin(np.pi * x)
            hump_f = (0.3 + co["hump_f"] + wig["hump_f"][t]) * shapes["hump"]
            hump_m = (1.1 - 0.45 * x + co["hump_m"] + wig["hump_m"][t]) * shapes["hump"]
            baseline[0, :, c, t] = common + hump_f
            baseline[1, :, c, t] = common + sex_gap + hump_m

    profiles = {k: disruption_profile(k, n_ages) for k in ("war", "respiratory", "enteric")}
    intensities = {}
    observed_z = baseline.copy()
    if cfg.include_disruptions:
        for plan in cfg.disruptions:
            prof = profiles[plan.kind]
            for c in plan.countries:
                if c >= cfg.n_countries:
                    continue
                for year in range(plan.years[0], plan.years[1] + 1):
                    t = year - cfg.start_year
                    if not (0 <= t < cfg.n_years):
                        continue
                    key = (c, year)
                    if key in intensities and intensities[key][0] == "war":
                        continue  # war dominates overlapping events
                    lam = float(rng.uniform(*plan.intensity))
                    intensities[key] = (plan.kind, lam)
                    observed_z[0, :, c, t] = baseline[0, :, c, t] + lam * prof[:n_ages]
                    observed_z[1, :, c, t] = baseline[1, :, c, t] + lam * prof[n_ages:]

    # exposure age profile: crude stable population
    share = np.exp(-0.03 * np.arange(n_ages))
    share /= share.sum()

    raw = RawSeries(n_ages=n_ages)
    for c, pop in enumerate(pops):
        size = cfg.small_size if c in cfg.small_countries else cfg.large_size
        exposure = size * share
        small = c in cfg.small_countries
        for t in range(offsets[c], cfg.n_years):
            year = int(years[t])
            for s, sex in enumerate(("female", "male")):
                z = observed_z[s, :, c, t]
                ax = np.full(n_ages, 0.5)
                ax[0] = 0.3
                if small:
                    q_true = expit(z)
                    m_true = mx_from_qx(q_true, ax)
                    deaths = rng.poisson(exposure * m_true).astype(float)
                    mx = deaths / exposure
                    qx = mx / (1.0 + (1.0 - ax) * mx)
                else:
                    zn = z + rng.normal(0.0, cfg.noise_scale, size=n_ages)
                    qx = expit(zn)
                    mx = mx_from_qx(qx, ax)
                    deaths = exposure * mx
                qx = np.minimum(qx, 1.0 - 1e-9)
                raw.tables[(pop, sex, year)] = TableRecord(pop, sex, year, qx, mx, ax.copy())
                raw.counts[(pop, sex, year)] = CountsRecord(
                    pop, sex, year, deaths, exposure.copy()
                )

    events = []
    for i, plan in enumerate(cfg.disruptions):
        events.append(
            Event(
                name=f"synthetic {plan.kind} {i}",
                type=plan.kind,
                years=plan.years,
                countries=[pops[c] for c in plan.countries if c < cfg.n_countries],
            )
        )
    dictionary = EventDictionary(events)

    truth = SynthTruth(
        archetypes=archetypes,
        development=development,
        profiles=profiles,
        intensities=intensities,
        baseline_z=baseline,
        populations=pops,
        years=years,
    )
    return raw, dictionary, truth
