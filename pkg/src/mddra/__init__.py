"""Driver-distraction severity scoring, segmentation, filtering and model bench."""
from mddra._kernels import BACKEND
from mddra.catalog import (
    BANDS,
    DistractionClass,
    ParameterCatalog,
    ParameterSpec,
    SeverityBand,
    SpeedMode,
    band_for,
    default_catalog,
    load_catalog,
    severity_rank,
)
from mddra.severity import (
    FrameObservation,
    SeverityAssessment,
    aggregate_severity,
    assess_stream,
    frame_severity,
    likelihood_of,
    normalized_term,
    risk_cell,
    speed_factor,
)
from mddra.trip import TripRecord, parse_trip, serialize_trip

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BANDS",
    "DistractionClass",
    "FrameObservation",
    "ParameterCatalog",
    "ParameterSpec",
    "SeverityAssessment",
    "SeverityBand",
    "SpeedMode",
    "TripRecord",
    "aggregate_severity",
    "assess_stream",
    "band_for",
    "default_catalog",
    "frame_severity",
    "likelihood_of",
    "load_catalog",
    "normalized_term",
    "parse_trip",
    "risk_cell",
    "serialize_trip",
    "severity_rank",
    "speed_factor",
]
