"""Adaptive temporal pooling of deaths and exposures.

Small populations show zero death counts at low-mortality "valley" ages
in single years; the resulting qx = 0 values blow up on the logit scale.
For each flagged population, chronological runs of ordinary years are
grown until the pooled central rate sum(D)/sum(E) is nonzero at every
valley age, then one internally consistent life table is recomputed from
the pooled mx and (arithmetically averaged) ax and assigned to every
year of the block.  Exceptional spells are pooled separately within the
spell so the disruption signal is not blended into ordinary years.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import PoolingError
from ..lifetable import lifetable_from_mx_ax


@dataclass
class PoolingReport:
    valley_ages: np.ndarray = None
    blocks: dict = field(default_factory=dict)  # pop -> list of [year, ...] blocks
    exceptional_blocks: dict = field(default_factory=dict)
    untouched: list = field(default_factory=list)


def find_valley_ages(raw, q_thresh=0.005):
    """Ages whose overall median qx across every table falls below q_thresh."""
    stacked = np.array([rec.qx for rec in raw.tables.values()])
    med = np.nanmedian(stacked, axis=0)
    return np.where(med < q_thresh)[0]


def _needs_pooling(raw, pop, years, valley):
    for year in years:
        for sex in ("female", "male"):
            rec = raw.tables.get((pop, sex, year))
            if rec is not None and np.any(rec.mx[valley] == 0.0):
                return True
    return False


def _pooled_rates(raw, pop, years, valley):
    """Per-sex pooled (mx, ax) over a set of years; None when counts missing."""
    out = {}
    for sex in ("female", "male"):
        d_sum = None
        e_sum = None
        ax_list = []
        for year in years:
            counts = raw.counts.get((pop, sex, year))
            table = raw.tables.get((pop, sex, year))
            if counts is None or table is None:
                return None
            d = np.nan_to_num(counts.deaths, nan=0.0)
            e = np.nan_to_num(counts.exposure, nan=0.0)
            d_sum = d if d_sum is None else d_sum + d
            e_sum = e if e_sum is None else e_sum + e
            ax_list.append(table.ax)
        with np.errstate(divide="ignore", invalid="ignore"):
            mx = np.where(e_sum > 0, d_sum / np.maximum(e_sum, 1e-300), 0.0)
        ax = np.mean(ax_list, axis=0)
        out[sex] = (mx, ax, bool(np.all(mx[valley] > 0.0)))
    return out


def _spells(years, is_exceptional):
    """Split an ordered year list into maximal runs of equal exceptional flag,
    breaking runs at calendar gaps."""
    runs = []
    current = []
    current_flag = None
    prev_year = None
    for year in years:
        flag = is_exceptional(year)
        if current and (flag != current_flag or year != prev_year + 1):
            runs.append((current_flag, current))
            current = []
        current.append(year)
        current_flag = flag
        prev_year = year
    if current:
        runs.append((current_flag, current))
    return runs


def adaptive_pool(raw, labels, q_thresh=0.005):
    """Pool flagged populations' counts until valley rates are zero-free.

    ``labels`` maps (pop, year) to a disruption label; years with a
    nonzero label form exceptional spells that are pooled within
    themselves.  Populations with no valley zeros are returned untouched.
    """
    out = raw.copy()
    valley = find_valley_ages(raw, q_thresh)
    report = PoolingReport(valley_ages=valley)

    for pop in raw.populations:
        years = raw.years_for(pop)
        if not _needs_pooling(raw, pop, years, valley):
            report.untouched.append(pop)
            continue

        have_counts = all(
            (pop, sex, year) in raw.counts
            for year in years
            for sex in ("female", "male")
        )
        if not have_counts:
            raise PoolingError(f"population {pop} needs pooling but lacks deaths/exposures")

        is_exc = lambda year: labels.get((pop, year), 0) != 0
        ordinary = [y for y in years if not is_exc(y)]
        exceptional_runs = [
            run for flag, run in _spells(years, is_exc) if flag
        ]

        # grow blocks over the chronological ordinary years
        blocks = []
        current = []
        for year in ordinary:
            current.append(year)
            rates = _pooled_rates(raw, pop, current, valley)
            if rates and all(ok for _, _, ok in rates.values()):
                blocks.append(current)
                current = []
        if current:
            if blocks:
                blocks[-1] = blocks[-1] + current
            else:
                blocks = [current]

        for block in blocks:
            rates = _pooled_rates(raw, pop, block, valley)
            for sex in ("female", "male"):
                mx, ax, _ = rates[sex]
                lt = lifetable_from_mx_ax(mx, ax)
                for year in block:
                    rec = out.tables[(pop, sex, year)]
                    rec.qx = lt.qx.copy()
                    rec.mx = mx.copy()
                    rec.ax = ax.copy()
        report.blocks[pop] = [list(b) for b in blocks]

        # exceptional spells pooled within the spell; an isolated year with
        # remaining zeros borrows 1-2 ordinary neighbor years per side
        exc_info = []
        for spell in exceptional_runs:
            source_years = list(spell)
            rates = _pooled_rates(raw, pop, source_years, valley)
            widen = 0
            while rates and not all(ok for _, _, ok in rates.values()) and widen < 2:
                widen += 1
                before = [y for y in ordinary if y < spell[0]][-widen:]
                after = [y for y in ordinary if y > spell[-1]][:widen]
                source_years = before + list(spell) + after
                rates = _pooled_rates(raw, pop, source_years, valley)
            for sex in ("female", "male"):
                mx, ax, _ = rates[sex]
                lt = lifetable_from_mx_ax(mx, ax)
                for year in spell:
                    rec = out.tables[(pop, sex, year)]
                    rec.qx = lt.qx.copy()
                    rec.mx = mx.copy()
                    rec.ax = ax.copy()
            exc_info.append({"spell": list(spell), "pooled_with": source_years})
        report.exceptional_blocks[pop] = exc_info

    return out, report
