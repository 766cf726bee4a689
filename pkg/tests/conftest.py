"""Shared fixtures: synthetic worlds at several sizes, pipelines run once."""

import numpy as np
import pytest

from mdmx.data import (
    SynthConfig,
    adaptive_pool,
    assemble_tensor,
    curate,
    label_exceptional,
    synthesize,
)
from mdmx.tucker import AgeSmoothingSpec, RankPolicy, hosvd, smooth_age_basis


def build_world(cfg):
    """Run synth -> label -> curate -> pool -> tensor."""
    raw, edict, truth = synthesize(cfg)
    labels, _ = label_exceptional(raw.populations, raw.years_by_population(), edict)
    cur, _ = curate(raw)
    pooled, _ = adaptive_pool(cur, labels)
    tensor = assemble_tensor(pooled, labels)
    return raw, edict, truth, labels, tensor


def regime_world_config(seed=11):
    """Static-development world: three honest Gaussian regimes in feature space."""
    return SynthConfig(
        seed=seed,
        n_countries=9,
        n_years=60,
        static_development=0.5,
        small_countries=(),
        include_disruptions=False,
        ragged_entry=False,
        noise_scale=0.02,
        wiggle_scale=0.18,
        archetype_jitter=0.01,
        wiggle_ar=0.0,
        timing_jitter=0.02,
    )


@pytest.fixture(scope="session")
def default_world():
    """The full default dynamic world with disruptions, pooling, raggedness."""
    cfg = SynthConfig(seed=7)
    raw, edict, truth, labels, tensor = build_world(cfg)
    return {
        "cfg": cfg,
        "raw": raw,
        "events": edict,
        "truth": truth,
        "labels": labels,
        "tensor": tensor,
    }


@pytest.fixture(scope="session")
def default_model(default_world):
    tensor = default_world["tensor"]
    model = hosvd(tensor, RankPolicy(tau=0.9999), weighting=True)
    return smooth_age_basis(model, AgeSmoothingSpec(), tensor=tensor.values)


@pytest.fixture(scope="session")
def regime_world():
    cfg = regime_world_config()
    raw, edict, truth, labels, tensor = build_world(cfg)
    model = hosvd(tensor, RankPolicy(tau=0.9999), weighting=True)
    model = smooth_age_basis(model, AgeSmoothingSpec(), tensor=tensor.values)
    return {"cfg": cfg, "truth": truth, "tensor": tensor, "model": model}
