"""Assembly of the complete 4-way logit-mortality tensor.

Every (country, year) cell ends up in exactly one of three states:
observed ordinary (mask 1), exceptional (mask 0, nonzero disruption
label, schedule retained separately), or missing (mask 0, label 0).
Masked and missing cells are imputed with the country's temporal mean of
observed values so the decomposition sees a complete array.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import EmptyTensor
from ..lifetable import TransformConfig, floor_and_logit


@dataclass
class MortalityTensor:
    values: np.ndarray  # (2, A, C, T) logit qx
    observed: np.ndarray  # (C, T) 1 = observed ordinary year
    disruption: np.ndarray  # (C, T) 0 none, 1 war, 2 respiratory, 3 enteric
    imputation_weight: np.ndarray  # (C, T) in [0, 1]
    populations: list
    years: np.ndarray
    exceptional: dict = field(default_factory=dict)  # (c, t) -> stacked 2A logit vector

    @property
    def n_ages(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def z_at(self, c, t):
        """Stacked female-then-male logit schedule stored at one cell."""
        return self.values[:, :, c, t].reshape(-1)

    def observed_cells(self):
        """(c, t) index pairs of observed ordinary cells, row-major order."""
        cs, ts = np.where(self.observed == 1)
        return list(zip(cs.tolist(), ts.tolist()))

    def exceptional_cells(self):
        return sorted(self.exceptional.keys())

    def audit(self):
        """Counts of the three mutually exclusive cell states."""
        obs = int((self.observed == 1).sum())
        exc = int(((self.observed == 0) & (self.disruption != 0)).sum())
        miss = int(((self.observed == 0) & (self.disruption == 0)).sum())
        return {"observed": obs, "exceptional": exc, "missing": miss}

    def provenance_hash(self):
        h = hashlib.sha256()
        for arr in (
            self.values,
            self.observed,
            self.disruption,
            self.imputation_weight,
            self.years,
        ):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(",".join(self.populations).encode())
        return h.hexdigest()

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.save(directory / "values.npy", self.values)
        np.save(directory / "observed.npy", self.observed)
        np.save(directory / "disruption.npy", self.disruption)
        np.save(directory / "imputation_weight.npy", self.imputation_weight)
        np.save(directory / "years.npy", self.years)
        cells = self.exceptional_cells()
        idx = np.array(cells, dtype=np.int64).reshape(len(cells), 2)
        vals = (
            np.array([self.exceptional[c] for c in cells])
            if cells
            else np.zeros((0, 2 * self.n_ages))
        )
        np.save(directory / "exceptional_index.npy", idx)
        np.save(directory / "exceptional_values.npy", vals)
        manifest = {
            "shape": [int(s) for s in self.values.shape],
            "populations": self.populations,
            "years": [int(y) for y in self.years],
            "n_exceptional": len(cells),
            "provenance_hash": self.provenance_hash(),
        }
        (directory / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True)
        )

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        idx = np.load(directory / "exceptional_index.npy")
        vals = np.load(directory / "exceptional_values.npy")
        exceptional = {
            (int(i), int(j)): vals[k] for k, (i, j) in enumerate(idx)
        }
        return cls(
            values=np.load(directory / "values.npy"),
            observed=np.load(directory / "observed.npy"),
            disruption=np.load(directory / "disruption.npy"),
            imputation_weight=np.load(directory / "imputation_weight.npy"),
            populations=list(manifest["populations"]),
            years=np.load(directory / "years.npy"),
            exceptional=exceptional,
        )


def assemble_tensor(raw, labels, min_years=5, transform=None, imputed_weight=0.0):
    """Build the MortalityTensor from curated (and possibly pooled) tables.

    Populations with fewer than ``min_years`` data years are dropped; the
    year axis is the sorted union of data years over retained populations.
    Exceptional cells are masked out, retained separately, and imputed
    exactly like missing cells.
    """
    transform = transform or TransformConfig()
    n_ages = raw.n_ages

    pops = [p for p in raw.populations if len(raw.years_for(p)) >= min_years]
    # a population whose every year is exceptional has no observable mean
    pops = [
        p
        for p in pops
        if any(labels.get((p, y), 0) == 0 for y in raw.years_for(p))
    ]
    if not pops:
        raise EmptyTensor("no population retains enough observed years")

    year_set = sorted({y for p in pops for y in raw.years_for(p)})
    years = np.array(year_set, dtype=int)
    year_index = {y: i for i, y in enumerate(year_set)}
    n_c, n_t = len(pops), len(years)

    values = np.zeros((2, n_ages, n_c, n_t))
    observed = np.zeros((n_c, n_t), dtype=np.int8)
    disruption = np.zeros((n_c, n_t), dtype=np.int8)
    has_data = np.zeros((n_c, n_t), dtype=bool)
    exceptional = {}

    for ci, pop in enumerate(pops):
        for year in raw.years_for(pop):
            ti = year_index[year]
            rec_f = raw.tables.get((pop, "female", year))
            rec_m = raw.tables.get((pop, "male", year))
            if rec_f is None or rec_m is None:
                continue
            zf = floor_and_logit(np.minimum(rec_f.qx, 1.0 - 1e-12), transform)
            zm = floor_and_logit(np.minimum(rec_m.qx, 1.0 - 1e-12), transform)
            has_data[ci, ti] = True
            label = labels.get((pop, year), 0)
            if label != 0:
                disruption[ci, ti] = label
                exceptional[(ci, ti)] = np.concatenate([zf, zm])
            else:
                observed[ci, ti] = 1
                values[0, :, ci, ti] = zf
                values[1, :, ci, ti] = zm

    # impute everything that is not an observed ordinary cell
    for ci in range(n_c):
        obs_t = np.where(observed[ci] == 1)[0]
        if len(obs_t) == 0:
            raise EmptyTensor(f"population {pops[ci]} has no ordinary observed years")
        mean_slice = values[:, :, ci, obs_t].mean(axis=2)
        for ti in range(n_t):
            if observed[ci, ti] != 1:
                values[:, :, ci, ti] = mean_slice

    weight = np.where(observed == 1, 1.0, float(imputed_weight))
    return MortalityTensor(
        values=values,
        observed=observed,
        disruption=disruption,
        imputation_weight=weight,
        populations=pops,
        years=years,
        exceptional=exceptional,
    )
