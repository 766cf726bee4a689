"""CSV ingestion of 1x1 period life tables and raw deaths/exposures.

Life table layout:  pop,sex,year,age,mx,qx,ax,lx,dx,Lx,Tx,ex
Counts layout:      pop,sex,year,age,deaths,exposure

sex is f|m; age is an integer 0..A-1 or the open interval "110+", which
is dropped.  Empty numeric cells become NaN and mark the table for the
curation pass.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DuplicateKey, InvalidInput, ParseError

SEX_CODES = {"f": "female", "m": "male"}
SEX_SHORT = {"female": "f", "male": "m"}

LIFETABLE_HEADER = ["pop", "sex", "year", "age", "mx", "qx", "ax", "lx", "dx", "Lx", "Tx", "ex"]
COUNTS_HEADER = ["pop", "sex", "year", "age", "deaths", "exposure"]


@dataclass
class TableRecord:
    """One sex-population-year life table (qx/mx/ax columns only)."""

    pop: str
    sex: str
    year: int
    qx: np.ndarray
    mx: np.ndarray
    ax: np.ndarray


@dataclass
class CountsRecord:
    pop: str
    sex: str
    year: int
    deaths: np.ndarray
    exposure: np.ndarray


@dataclass
class RawSeries:
    """Ingested life tables plus optional deaths/exposures, age-indexed 0..A-1."""

    n_ages: int
    tables: dict = field(default_factory=dict)  # (pop, sex, year) -> TableRecord
    counts: dict = field(default_factory=dict)  # (pop, sex, year) -> CountsRecord

    @property
    def populations(self):
        return sorted({k[0] for k in self.tables})

    def years_for(self, pop):
        return sorted({k[2] for k in self.tables if k[0] == pop})

    def years_by_population(self):
        return {pop: self.years_for(pop) for pop in self.populations}

    def sexes_for(self, pop, year):
        return sorted(
            {k[1] for k in self.tables if k[0] == pop and k[2] == year}
        )

    def n_cells(self):
        """Record count at (pop, sex, year, age) granularity."""
        return len(self.tables) * self.n_ages

    def copy(self):
        import copy as _copy

        return _copy.deepcopy(self)


def _parse_float(token, line_no, what):
    token = token.strip()
    if token == "" or token == ".":
        return np.nan
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"bad {what} value {token!r}", line=line_no) from None


def _parse_age(token, line_no):
    token = token.strip()
    if token.endswith("+"):
        return None  # open interval, dropped
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"bad age value {token!r}", line=line_no) from None


def ingest(paths, format="lifetable", n_ages=110):
    """Read one or more CSV files into a RawSeries.

    ``format`` picks the layout: "lifetable" or "counts".  Duplicate
    (pop, sex, year, age) keys raise DuplicateKey; malformed rows raise
    ParseError with the line number.
    """
    if format not in ("lifetable", "counts"):
        raise InvalidInput(f"unknown format {format!r}")
    if isinstance(paths, (str, Path)):
        paths = [paths]
    raw = RawSeries(n_ages=n_ages)
    staging = {}
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            expected = LIFETABLE_HEADER if format == "lifetable" else COUNTS_HEADER
            if header is None or [h.strip() for h in header] != expected:
                raise ParseError(f"{path}: expected header {','.join(expected)}", line=1)
            for line_no, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(expected):
                    raise ParseError(
                        f"{path}: expected {len(expected)} fields, got {len(row)}",
                        line=line_no,
                    )
                pop = row[0].strip()
                sex_code = row[1].strip().lower()
                if sex_code not in SEX_CODES:
                    raise ParseError(f"bad sex {row[1]!r}", line=line_no)
                sex = SEX_CODES[sex_code]
                try:
                    year = int(row[2])
                except ValueError:
                    raise ParseError(f"bad year {row[2]!r}", line=line_no) from None
                age = _parse_age(row[3], line_no)
                if age is None:
                    continue
                if age < 0 or age >= n_ages:
                    continue  # outside the tracked range
                key = (pop, sex, year)
                if key not in staging:
                    if format == "lifetable":
                        staging[key] = {
                            "qx": np.full(n_ages, np.nan),
                            "mx": np.full(n_ages, np.nan),
                            "ax": np.full(n_ages, np.nan),
                            "seen": np.zeros(n_ages, dtype=bool),
                        }
                    else:
                        staging[key] = {
                            "deaths": np.full(n_ages, np.nan),
                            "exposure": np.full(n_ages, np.nan),
                            "seen": np.zeros(n_ages, dtype=bool),
                        }
                cell = staging[key]
                if cell["seen"][age]:
                    raise DuplicateKey(f"{pop}/{sex_code}/{year}/age {age} appears twice")
                cell["seen"][age] = True
                if format == "lifetable":
                    cell["mx"][age] = _parse_float(row[4], line_no, "mx")
                    cell["qx"][age] = _parse_float(row[5], line_no, "qx")
                    cell["ax"][age] = _parse_float(row[6], line_no, "ax")
                else:
                    d = _parse_float(row[4], line_no, "deaths")
                    e = _parse_float(row[5], line_no, "exposure")
                    if d < 0 or e < 0:
                        raise ParseError("negative deaths or exposure", line=line_no)
                    cell["deaths"][age] = d
                    cell["exposure"][age] = e

    for (pop, sex, year), cell in staging.items():
        if format == "lifetable":
            raw.tables[(pop, sex, year)] = TableRecord(
                pop=pop, sex=sex, year=year, qx=cell["qx"], mx=cell["mx"], ax=cell["ax"]
            )
        else:
            raw.counts[(pop, sex, year)] = CountsRecord(
                pop=pop, sex=sex, year=year, deaths=cell["deaths"], exposure=cell["exposure"]
            )
    return raw


def merge_counts(raw, counts_series):
    """Attach a counts RawSeries to a life table RawSeries in place."""
    raw.counts.update(counts_series.counts)
    return raw


def write_lifetable_csv(path, records, n_ages=110):
    """Write TableRecords in the documented life table CSV layout."""
    from ..lifetable import lifetable_from_mx_ax

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LIFETABLE_HEADER)
        for rec in records:
            lt = None
            if np.all(np.isfinite(rec.mx)) and np.all(np.isfinite(rec.ax)):
                lt = lifetable_from_mx_ax(rec.mx, rec.ax)
            for age in range(n_ages):
                if lt is not None:
                    extra = [
                        f"{lt.lx[age]:.9g}",
                        f"{lt.dx[age]:.9g}",
                        f"{lt.Lx[age]:.9g}",
                        f"{lt.Tx[age]:.9g}",
                        f"{lt.ex[age]:.9g}",
                    ]
                else:
                    extra = ["", "", "", "", ""]
                writer.writerow(
                    [
                        rec.pop,
                        SEX_SHORT[rec.sex],
                        rec.year,
                        age,
                        _fmt(rec.mx[age]),
                        _fmt(rec.qx[age]),
                        _fmt(rec.ax[age]),
                        *extra,
                    ]
                )


def write_counts_csv(path, records, n_ages=110):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COUNTS_HEADER)
        for rec in records:
            for age in range(n_ages):
                writer.writerow(
                    [
                        rec.pop,
                        SEX_SHORT[rec.sex],
                        rec.year,
                        age,
                        _fmt(rec.deaths[age]),
                        _fmt(rec.exposure[age]),
                    ]
                )


def _fmt(v):
    if not np.isfinite(v):
        return ""
    return f"{v:.12g}"
