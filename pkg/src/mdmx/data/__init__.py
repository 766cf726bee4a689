"""Ingestion, curation, exceptional-year labeling, pooling, and tensor assembly."""

from .curate import CurationConfig, CurationReport, curate
from .events import (
    LABEL_ENTERIC,
    LABEL_NONE,
    LABEL_RESPIRATORY,
    LABEL_TO_TYPE,
    LABEL_WAR,
    Event,
    EventDictionary,
    label_exceptional,
)
from .ingest import (
    CountsRecord,
    RawSeries,
    TableRecord,
    ingest,
    merge_counts,
    write_counts_csv,
    write_lifetable_csv,
)
from .pooling import PoolingReport, adaptive_pool, find_valley_ages
from .synth import DisruptionPlan, SynthConfig, SynthTruth, disruption_profile, synthesize
from .tensor import MortalityTensor, assemble_tensor

__all__ = [
    "CountsRecord",
    "CurationConfig",
    "CurationReport",
    "DisruptionPlan",
    "Event",
    "EventDictionary",
    "LABEL_ENTERIC",
    "LABEL_NONE",
    "LABEL_RESPIRATORY",
    "LABEL_TO_TYPE",
    "LABEL_WAR",
    "MortalityTensor",
    "PoolingReport",
    "RawSeries",
    "SynthConfig",
    "SynthTruth",
    "TableRecord",
    "adaptive_pool",
    "assemble_tensor",
    "curate",
    "disruption_profile",
    "find_valley_ages",
    "ingest",
    "label_exceptional",
    "merge_counts",
    "synthesize",
    "write_counts_csv",
    "write_lifetable_csv",
]
