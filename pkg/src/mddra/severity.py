"""Per-frame severity scoring, windowed aggregation and the risk matrix.

Scalar functions (``frame_severity``, ``aggregate_severity``) are the
reference definitions. ``score_trip`` is the columnar path used for whole
trips; it performs the same floating-point operations in the same order,
so both paths agree exactly.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from mddra import _kernels
from mddra.catalog import (
    BANDS,
    DEFAULT_WINDOW,
    PARAMETER_NAMES,
    DistractionClass,
    ParameterCatalog,
    ParameterSpec,
    SeverityBand,
    SpeedMode,
    ValidationError,
    band_for,
    canonical_label,
)

DEFAULT_LIKELIHOOD: Mapping[int, int] = {1: 1, 2: 2, 3: 3, 4: 4, 5: 4, 6: 4, 7: 4}

_SURROUNDINGS = PARAMETER_NAMES.index("surroundings")
_ROAD = PARAMETER_NAMES.index("road_type")


@dataclass(frozen=True, slots=True)
class FrameObservation:
    index: int
    hand_state: str
    road_type: str
    face_orientation: str
    illumination: str
    eye_gaze: str
    weather: str
    manoeuvre: str
    surroundings: str
    pedestrians: str
    speed: float

    def actions(self) -> tuple[str, ...]:
        """Action labels in catalog parameter order."""
        return (
            self.hand_state,
            self.road_type,
            self.face_orientation,
            self.illumination,
            self.eye_gaze,
            self.weather,
            self.manoeuvre,
            self.surroundings,
            self.pedestrians,
        )


@dataclass(frozen=True, slots=True)
class SeverityAssessment:
    frame_index: int
    frame_score: float
    aggregate_score: float
    band: SeverityBand
    rank: int
    likelihood: int
    risk_value: int
    takeover: bool

    @property
    def distraction_class(self) -> DistractionClass:
        return self.band.distraction_class


def _check_speed(speed: float) -> float:
    speed = float(speed)
    if not math.isfinite(speed) or speed < 0.0:
        raise ValidationError(f"speed must be finite and non-negative, got {speed!r}")
    return speed


def validate_frame(frame: FrameObservation, catalog: ParameterCatalog) -> None:
    if isinstance(frame.index, bool) or not isinstance(frame.index, int) or frame.index < 0:
        raise ValidationError(f"frame index must be a non-negative integer, got {frame.index!r}")
    for spec, action in zip(catalog.parameters, frame.actions()):
        spec.index(action)
    _check_speed(frame.speed)


def normalized_term(param: ParameterSpec, action: str) -> float:
    return param.weight(action) / param.max_weight


def speed_factor(speed: float, road_type: str, catalog: ParameterCatalog) -> float:
    """Speed relative to the road-type limit, scaled by the road-type weight fraction."""
    speed = _check_speed(speed)
    road = catalog.param("road_type")
    ratio = speed / catalog.speed_limit(road_type)
    value = min(ratio, 1.0) * normalized_term(road, road_type)
    return min(max(value, 0.0), 1.0)


def frame_severity(frame: FrameObservation, catalog: ParameterCatalog) -> float:
    validate_frame(frame, catalog)
    terms = [normalized_term(p, a) for p, a in zip(catalog.parameters, frame.actions())]
    sf = speed_factor(frame.speed, frame.road_type, catalog)
    if catalog.speed_mode is SpeedMode.SURROUNDINGS_MULTIPLIER:
        terms[_SURROUNDINGS] = sf * terms[_SURROUNDINGS]
    else:
        terms.append(sf)
    total = 0.0
    for t in terms:
        total += t
    return min(max(total / len(terms), 0.0), 1.0)


def aggregate_severity(current: float, history: Sequence[float]) -> float:
    """Mean of ``current`` and the preceding scores (oldest first)."""
    total = 0.0
    for s in history:
        total += s
    total += current
    return total / (len(history) + 1)


def likelihood_of(aggregate_score: float, mapping: Mapping[int, int] | None = None) -> int:
    mapping = DEFAULT_LIKELIHOOD if mapping is None else mapping
    return mapping[band_for(aggregate_score).rank]


def risk_cell(rank: int, likelihood: int) -> int:
    if not (isinstance(rank, (int, np.integer)) and 1 <= rank <= 7):
        raise ValidationError(f"rank must be in 1..7, got {rank!r}")
    if not (isinstance(likelihood, (int, np.integer)) and 1 <= likelihood <= 4):
        raise ValidationError(f"likelihood must be in 1..4, got {likelihood!r}")
    return int(rank) * int(likelihood)


def risk_matrix() -> list[tuple[str, list[int]]]:
    """Seven-row rendering of the risk matrix, most severe row first.

    Columns are ``[r*1, r*1, r*2, r*3, r*4]`` for rank ``r``.
    """
    rows = []
    for band in reversed(BANDS):
        r = band.rank
        rows.append((band.matrix_label, [risk_cell(r, 1)] + [risk_cell(r, lk) for lk in range(1, 5)]))
    return rows


# ---------------------------------------------------------------------------
# columnar path


def _lookup_tables(catalog: ParameterCatalog):
    terms = [np.array([w / p.max_weight for _, w in p.actions]) for p in catalog.parameters]
    road = catalog.param("road_type")
    limits = np.array([catalog.speed_limit(a) for a in road.labels])
    return terms, limits


def encode_frames(frames: Sequence[FrameObservation], catalog: ParameterCatalog):
    """Action indices (n x 9) and speeds for a frame sequence, validating each frame."""
    n = len(frames)
    lookups = [{a: i for i, a in enumerate(p.labels)} for p in catalog.parameters]
    codes = np.empty((n, len(lookups)), dtype=np.int64)
    speeds = np.empty(n, dtype=np.float64)
    for row, frame in enumerate(frames):
        for col, (table, action) in enumerate(zip(lookups, frame.actions())):
            code = table.get(action)
            if code is None:
                code = catalog.parameters[col].index(action)
            codes[row, col] = code
        speeds[row] = frame.speed
    if n and (not np.all(np.isfinite(speeds)) or speeds.min() < 0.0):
        bad = int(np.flatnonzero(~np.isfinite(speeds) | (speeds < 0.0))[0])
        raise ValidationError(f"frame {frames[bad].index}: speed must be finite and non-negative")
    return codes, speeds


def term_matrix(codes: np.ndarray, speeds: np.ndarray, catalog: ParameterCatalog):
    """Per-frame normalized terms (n x 9) and speed factors (n,)."""
    terms, limits = _lookup_tables(catalog)
    mat = np.empty(codes.shape, dtype=np.float64)
    for col, table in enumerate(terms):
        mat[:, col] = table[codes[:, col]]
    road = codes[:, _ROAD]
    sf = np.minimum(speeds / limits[road], 1.0) * mat[:, _ROAD]
    return mat, np.clip(sf, 0.0, 1.0)


def frame_scores(codes: np.ndarray, speeds: np.ndarray, catalog: ParameterCatalog) -> np.ndarray:
    mat, sf = term_matrix(codes, speeds, catalog)
    cols = [mat[:, c] for c in range(mat.shape[1])]
    if catalog.speed_mode is SpeedMode.SURROUNDINGS_MULTIPLIER:
        cols[_SURROUNDINGS] = sf * cols[_SURROUNDINGS]
    else:
        cols.append(sf)
    total = np.zeros(codes.shape[0])
    for col in cols:
        total = total + col
    return np.clip(total / len(cols), 0.0, 1.0)


@dataclass(frozen=True)
class StreamScores:
    """Columnar scores for a whole trip."""

    frame_index: np.ndarray
    frame_score: np.ndarray
    aggregate_score: np.ndarray
    rank: np.ndarray
    likelihood: np.ndarray
    risk_value: np.ndarray
    takeover: np.ndarray

    def __len__(self) -> int:
        return self.frame_index.shape[0]

    def assessments(self) -> list[SeverityAssessment]:
        return [
            SeverityAssessment(
                int(i), float(fs), float(ag), BANDS[int(r) - 1], int(r), int(lk), int(rv), bool(tk)
            )
            for i, fs, ag, r, lk, rv, tk in zip(
                self.frame_index.tolist(),
                self.frame_score.tolist(),
                self.aggregate_score.tolist(),
                self.rank.tolist(),
                self.likelihood.tolist(),
                self.risk_value.tolist(),
                self.takeover.tolist(),
            )
        ]


_BAND_LOWERS = np.array([b.lower for b in BANDS])


def ranks_for(scores: np.ndarray) -> np.ndarray:
    return np.searchsorted(_BAND_LOWERS, scores, side="right").astype(np.int64)


def takeover_flags(ranks: np.ndarray) -> np.ndarray:
    """True where the banded class crosses from safe/careless into dangerous."""
    dangerous = ranks >= 5
    flags = np.zeros(ranks.shape[0], dtype=bool)
    flags[1:] = dangerous[1:] & ~dangerous[:-1]
    return flags


def _check_indices(indices: np.ndarray) -> None:
    if indices.size and (indices[0] < 0 or np.any(np.diff(indices) <= 0)):
        raise ValidationError("frame indices must be non-negative and strictly increasing")


def score_frames(
    frames: Sequence[FrameObservation],
    catalog: ParameterCatalog,
    window: int = DEFAULT_WINDOW,
    likelihood_map: Mapping[int, int] | None = None,
) -> StreamScores:
    if window < 1:
        raise ValidationError("window must be >= 1")
    indices = np.fromiter((f.index for f in frames), dtype=np.int64, count=len(frames))
    _check_indices(indices)
    codes, speeds = encode_frames(frames, catalog)
    fs = frame_scores(codes, speeds, catalog)
    agg = np.clip(_kernels.sliding_mean(fs, window), 0.0, 1.0)
    ranks = ranks_for(agg)
    mapping = DEFAULT_LIKELIHOOD if likelihood_map is None else likelihood_map
    lk_table = np.array([0] + [mapping[r] for r in range(1, 8)], dtype=np.int64)
    likelihood = lk_table[ranks]
    return StreamScores(indices, fs, agg, ranks, likelihood, ranks * likelihood, takeover_flags(ranks))


def score_trip(trip, catalog: ParameterCatalog, window: int = DEFAULT_WINDOW, likelihood_map=None) -> StreamScores:
    return score_frames(trip.frames, catalog, window, likelihood_map)


def assess_stream(
    trip, catalog: ParameterCatalog, window: int = DEFAULT_WINDOW, likelihood_map=None
) -> list[SeverityAssessment]:
    """One assessment per frame, in input order."""
    return score_trip(trip, catalog, window, likelihood_map).assessments()


class StreamAggregator:
    """Incremental scorer owning the trailing window for a single live stream."""

    def __init__(self, catalog: ParameterCatalog, window: int = DEFAULT_WINDOW, likelihood_map=None):
        if window < 1:
            raise ValidationError("window must be >= 1")
        self.catalog = catalog
        self.window = window
        self.likelihood_map = likelihood_map
        self._history: deque[float] = deque(maxlen=window - 1 if window > 1 else 0)
        self._last_index: int | None = None
        self._last_dangerous: bool | None = None

    def push(self, frame: FrameObservation) -> SeverityAssessment:
        if self._last_index is not None and frame.index <= self._last_index:
            raise ValidationError("frame indices must be strictly increasing")
        score = frame_severity(frame, self.catalog)
        agg = min(max(aggregate_severity(score, list(self._history)), 0.0), 1.0)
        band = band_for(agg)
        lk = likelihood_of(agg, self.likelihood_map)
        dangerous = band.distraction_class.is_dangerous
        takeover = self._last_dangerous is False and dangerous
        if self.window > 1:
            self._history.append(score)
        self._last_index = frame.index
        self._last_dangerous = dangerous
        return SeverityAssessment(frame.index, score, agg, band, band.rank, lk, risk_cell(band.rank, lk), takeover)

    def extend(self, frames: Iterable[FrameObservation]) -> list[SeverityAssessment]:
        return [self.push(f) for f in frames]


def make_frame(index: int, speed: float = 0.0, **actions: str) -> FrameObservation:
    """Build a frame, defaulting every unspecified parameter to its lowest-weight action."""
    defaults = {
        "hand_state": "double_hand",
        "road_type": "urban",
        "face_orientation": "on_road",
        "illumination": "day",
        "eye_gaze": "eyes_on_road",
        "weather": "dry",
        "manoeuvre": "stopped",
        "surroundings": "vehicle_not_present",
        "pedestrians": "not_present",
    }
    for key, value in actions.items():
        if key not in defaults:
            raise TypeError(f"unknown parameter {key!r}")
        defaults[key] = canonical_label(value)
    return FrameObservation(index=index, speed=float(speed), **defaults)
