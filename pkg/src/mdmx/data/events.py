"""Disruption event dictionaries and country-year labeling.

Labels: 0 = ordinary year, 1 = war, 2 = respiratory pandemic,
3 = enteric pandemic.  A country-year covered by several events takes the
war label when a war is among them (combat mortality dominates there),
then respiratory over enteric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import InvalidInput

LABEL_NONE = 0
LABEL_WAR = 1
LABEL_RESPIRATORY = 2
LABEL_ENTERIC = 3

TYPE_TO_LABEL = {"war": LABEL_WAR, "respiratory": LABEL_RESPIRATORY, "enteric": LABEL_ENTERIC}
LABEL_TO_TYPE = {v: k for k, v in TYPE_TO_LABEL.items()}


@dataclass
class Event:
    name: str
    type: str
    years: tuple  # inclusive (start, end)
    countries: list | str  # population codes, or "*" for all present
    peaks: dict = field(default_factory=dict)  # code -> list of (start, end)

    def __post_init__(self):
        if self.type not in TYPE_TO_LABEL:
            raise InvalidInput(f"unknown event type {self.type!r}")
        start, end = self.years
        if end < start:
            raise InvalidInput(f"event {self.name!r} has an empty year range")

    def active_years(self, code):
        """Impact years for one population, honoring per-country peaks."""
        if self.peaks and code in self.peaks:
            out = []
            for start, end in self.peaks[code]:
                out.extend(range(start, end + 1))
            return out
        return list(range(self.years[0], self.years[1] + 1))

    def applies_to(self, code):
        return self.countries == "*" or code in self.countries


@dataclass
class EventDictionary:
    events: list

    @classmethod
    def from_file(cls, path):
        payload = json.loads(Path(path).read_text())
        return cls._from_payload(payload)

    @classmethod
    def bundled(cls):
        """The dictionary of historical wars and pandemics shipped with the package."""
        payload = json.loads(
            resources.files("mdmx").joinpath("_data/events.json").read_text()
        )
        return cls._from_payload(payload)

    @classmethod
    def _from_payload(cls, payload):
        events = []
        for entry in payload["events"]:
            events.append(
                Event(
                    name=entry["name"],
                    type=entry["type"],
                    years=tuple(entry["years"]),
                    countries=entry["countries"],
                    peaks={
                        k: [tuple(r) for r in v]
                        for k, v in entry.get("peaks", {}).items()
                    },
                )
            )
        return cls(events)

    def to_payload(self):
        return {
            "version": 1,
            "events": [
                {
                    "name": e.name,
                    "type": e.type,
                    "years": list(e.years),
                    "countries": e.countries,
                    **({"peaks": {k: [list(r) for r in v] for k, v in e.peaks.items()}} if e.peaks else {}),
                }
                for e in self.events
            ],
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_payload(), indent=2))


def label_exceptional(populations, years_by_population, dictionary):
    """Disruption label per (population, year).

    ``years_by_population`` maps each population code to its ingested
    years; only those country-years are labeled.  Dictionary populations
    that match nothing are reported (not fatal) in the second return
    value.  Overlaps resolve to the lowest label (war beats respiratory
    beats enteric).
    """
    populations = list(populations)
    pop_set = set(populations)
    labels = {}
    unresolved = []
    for event in dictionary.events:
        if event.countries == "*":
            targets = populations
        else:
            targets = [c for c in event.countries if c in pop_set]
            unresolved.extend(c for c in event.countries if c not in pop_set)
        lab = TYPE_TO_LABEL[event.type]
        for code in targets:
            have = years_by_population.get(code, ())
            have = set(have)
            for year in event.active_years(code):
                if year in have:
                    key = (code, year)
                    if key not in labels or lab < labels[key]:
                        labels[key] = lab
    return labels, sorted(set(unresolved))
