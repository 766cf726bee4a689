"""Curation of ingested life tables: missing values, flat tables, sex pairing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class CurationConfig:
    # ages compared to detect resolution-limited flat old-age tables
    flat_age_pair: tuple = (105, 109)
    # civilian-duplicate population series dropped outright
    excluded_populations: tuple = ("FRACNP", "GBRCENW")


@dataclass
class CurationReport:
    drops: list = field(default_factory=list)  # (pop, sex|None, year, reason)

    def add(self, pop, sex, year, reason):
        self.drops.append({"pop": pop, "sex": sex, "year": year, "reason": reason})

    def __len__(self):
        return len(self.drops)


def curate(raw, cfg=None):
    """Apply the curation rules; returns (curated RawSeries, CurationReport).

    Drops: excluded population series; tables with any missing value; flat
    tables (equal nonzero qx at the two configured high ages) together
    with their sex partner; and any unpaired single-sex country-year.
    """
    cfg = cfg or CurationConfig()
    report = CurationReport()
    out = raw.copy()

    for key in list(out.tables):
        if key[0] in cfg.excluded_populations:
            report.add(key[0], key[1], key[2], "excluded population series")
            del out.tables[key]

    hi1, hi2 = cfg.flat_age_pair
    hi1 = min(hi1, raw.n_ages - 1)
    hi2 = min(hi2, raw.n_ages - 1)
    flagged_pairs = set()
    for key, rec in list(out.tables.items()):
        if (
            np.any(~np.isfinite(rec.qx))
            or np.any(~np.isfinite(rec.mx))
            or np.any(~np.isfinite(rec.ax))
        ):
            report.add(rec.pop, rec.sex, rec.year, "missing values")
            del out.tables[key]
            continue
        if hi1 != hi2 and rec.qx[hi1] == rec.qx[hi2] and rec.qx[hi1] != 0.0:
            report.add(rec.pop, rec.sex, rec.year, f"flat qx at ages {hi1}/{hi2}")
            flagged_pairs.add((rec.pop, rec.year))
            del out.tables[key]

    # partner of a flat table goes too, then any remaining unpaired sex
    for key in list(out.tables):
        pop, sex, year = key
        if (pop, year) in flagged_pairs:
            report.add(pop, sex, year, "sex partner of a flat table")
            del out.tables[key]
    for key in list(out.tables):
        pop, sex, year = key
        partner = (pop, "male" if sex == "female" else "female", year)
        if partner not in out.tables:
            report.add(pop, sex, year, "unpaired sex")
            del out.tables[key]

    kept_keys = set(out.tables)
    out.counts = {
        k: v
        for k, v in out.counts.items()
        if k in kept_keys or k[0] in {p for p, _, _ in kept_keys}
    }
    return out, report
