"""Seeded synthetic trip generator.

Random draws come from :class:`mddra.prng.Xoshiro256` in a fixed layout
so a seed determines the trip exactly.

Without a CPT set, frame ``t`` consumes 11 uniforms ``u[0..10]``:
``u[0..8]`` pick the nine actions (catalog order) by inverse CDF, i.e. the
first action whose cumulative probability exceeds the draw; ``u[9]`` and
``u[10]`` give the speed innovation
``z = sqrt(-2 ln(1 - u[9])) * cos(2 pi u[10])``.

With a CPT set, frame ``t`` consumes ``2 + n_families`` uniforms: the
state (from the prior at ``t = 0``, else the transition row), one per
family in CPT order, then one placing the speed inside its bin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from mddra.catalog import (
    CLASS_LABELS,
    DEFAULT_WINDOW,
    PARAMETER_NAMES,
    ParameterCatalog,
    ValidationError,
    canonical_label,
    default_catalog,
)
from mddra.dbn import SPEED_BINS, CptSet, variable_outcomes
from mddra.prng import Xoshiro256
from mddra.severity import FrameObservation, score_frames
from mddra.trip import TripRecord

Distribution = Mapping[str, Mapping[str, float]]


@dataclass(frozen=True)
class Segment:
    """A stretch of the trip whose action probabilities move linearly from ``start`` to ``end``.

    ``length`` is relative; segment lengths are scaled to the frame count.
    Parameters missing from ``start`` are uniform over their actions.
    """

    length: float
    start: Distribution
    end: Distribution | None = None
    speed_fraction: float = 0.8
    speed_fraction_end: float | None = None


@dataclass(frozen=True)
class SpeedProcess:
    """Mean-reverting speed: ``s += reversion * (target - s) + sigma * z``, clamped at 0.

    The target is ``fraction * limit(road)``, or 0 while the manoeuvre is ``stopped``.
    """

    reversion: float = 0.2
    sigma: float = 1.5
    initial_fraction: float = 0.8


@dataclass(frozen=True)
class ScenarioConfig:
    frame_count: int
    seed: int
    segments: tuple[Segment, ...]
    speed: SpeedProcess = field(default_factory=SpeedProcess)
    cpts: CptSet | None = None
    name: str = "custom"
    frame_rate: float = 1.0
    window: int = DEFAULT_WINDOW
    driver_id: str = "synthetic"

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValidationError("frame_count must be >= 1")
        if not self.segments and self.cpts is None:
            raise ValidationError("at least one segment is required")
        if any(s.length <= 0 for s in self.segments):
            raise ValidationError("segment lengths must be positive")


def _prob_matrix(dist: Distribution, catalog: ParameterCatalog) -> list[np.ndarray]:
    out = []
    known = set(PARAMETER_NAMES)
    for key in dist:
        if key not in known:
            raise ValidationError(f"unknown parameter {key!r} in distribution")
    for p in catalog.parameters:
        spec = dist.get(p.name)
        if spec is None:
            out.append(np.full(len(p.labels), 1.0 / len(p.labels)))
            continue
        probs = np.zeros(len(p.labels))
        for label, value in spec.items():
            probs[p.index(label)] = float(value)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValidationError(f"distribution for {p.name!r} must be non-negative and sum to 1")
        out.append(probs / probs.sum())
    return out


def _segment_bounds(segments: Sequence[Segment], n: int) -> list[int]:
    total = sum(s.length for s in segments)
    acc = 0.0
    bounds = [0]
    for s in segments:
        acc += s.length
        bounds.append(int(math.floor(acc / total * n + 1e-9)))
    bounds[-1] = n
    return bounds


def _schedules(config: ScenarioConfig, catalog: ParameterCatalog):
    """Per-frame action probabilities (list of n x m arrays) and speed fractions."""
    n = config.frame_count
    probs = [np.empty((n, len(p.labels))) for p in catalog.parameters]
    fractions = np.empty(n)
    bounds = _segment_bounds(config.segments, n)
    for seg, lo, hi in zip(config.segments, bounds, bounds[1:]):
        if hi <= lo:
            continue
        a = _prob_matrix(seg.start, catalog)
        b = _prob_matrix(seg.end, catalog) if seg.end is not None else a
        tau = (np.arange(hi - lo) / (hi - lo))[:, None]
        for col in range(len(probs)):
            probs[col][lo:hi] = (1.0 - tau) * a[col][None, :] + tau * b[col][None, :]
        f0 = seg.speed_fraction
        f1 = seg.speed_fraction if seg.speed_fraction_end is None else seg.speed_fraction_end
        fractions[lo:hi] = (1.0 - tau[:, 0]) * f0 + tau[:, 0] * f1
    return probs, fractions


def _inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=-1)
    cum[..., -1] = np.inf
    if cum.ndim == 1:
        return np.searchsorted(cum, u, side="right")
    return (u[:, None] >= cum).sum(axis=1)


def engine_labels(frames: Sequence[FrameObservation], catalog: ParameterCatalog, window: int) -> list[str]:
    """Three-class labels from the banded aggregate severity."""
    ranks = score_frames(frames, catalog, window).rank
    table = np.array(["", "safe", "safe", "safe", "careless", "dangerous", "dangerous", "dangerous"])
    return table[ranks].tolist()


def generate(config: ScenarioConfig, catalog: ParameterCatalog | None = None) -> TripRecord:
    """Sample a trip; ``labels`` come from the CPT chain when given, else from the severity engine."""
    catalog = catalog or default_catalog()
    if config.cpts is not None:
        return _generate_from_cpts(config, catalog)
    n = config.frame_count
    rng = Xoshiro256(config.seed)
    u = rng.uniforms(11 * n).reshape(n, 11)
    probs, fractions = _schedules(config, catalog)
    codes = np.column_stack([_inverse_cdf(probs[c], u[:, c]) for c in range(9)])
    z = np.sqrt(-2.0 * np.log1p(-u[:, 9])) * np.cos(2.0 * math.pi * u[:, 10])

    road = catalog.param("road_type")
    limits = np.array([catalog.speed_limit(a) for a in road.labels])[codes[:, 1]]
    stopped = catalog.param("manoeuvre").index("stopped")
    targets = np.where(codes[:, 6] == stopped, 0.0, fractions * limits)
    sp = config.speed
    speeds = np.empty(n)
    s = sp.initial_fraction * limits[0]
    for t in range(n):
        s = s + sp.reversion * (targets[t] - s) + sp.sigma * z[t]
        if s < 0.0:
            s = 0.0
        speeds[t] = s

    labels = [p.labels for p in catalog.parameters]
    frames = [
        FrameObservation(t, *(labels[c][codes[t, c]] for c in range(9)), float(speeds[t]))
        for t in range(n)
    ]
    return TripRecord(
        frames,
        trip_id=f"{config.name}-{config.seed}",
        driver_id=config.driver_id,
        frame_rate=config.frame_rate,
        seed=config.seed,
        labels=engine_labels(frames, catalog, config.window),
    )


def _generate_from_cpts(config: ScenarioConfig, catalog: ParameterCatalog) -> TripRecord:
    cpts = config.cpts
    n = config.frame_count
    fams = list(cpts.families.items())
    width = 2 + len(fams)
    u = Xoshiro256(config.seed).uniforms(width * n).reshape(n, width)
    param_names = set(PARAMETER_NAMES)
    frames: list[FrameObservation] = []
    states: list[str] = []
    state = -1
    for t in range(n):
        row = cpts.prior if t == 0 else cpts.transition[state]
        state = int(_inverse_cdf(row, u[t, 0]))
        values: dict[str, str] = {}
        for j, (name, fam) in enumerate(fams):
            code = int(_inverse_cdf(fam.table[state], u[t, 1 + j]))
            for var, idx, opts in zip(fam.variables, fam.decode(code), fam.outcomes):
                values[var] = opts[idx]
        missing = param_names - set(values)
        if missing:
            raise ValidationError(f"CPT families do not cover parameters {sorted(missing)}")
        limit = catalog.speed_limit(values["road_type"])
        frac = u[t, -1]
        bin_idx = SPEED_BINS.index(values.get("speed_bin", "legal"))
        if bin_idx == 0:
            speed = frac * 0.5 * limit
        elif bin_idx == 1:
            speed = 0.5 * limit + frac * 0.5 * limit
        else:
            speed = limit * (1.0 + 0.3 * (1.0 - frac))
        frames.append(FrameObservation(t, *(values[p] for p in PARAMETER_NAMES), float(speed)))
        states.append(cpts.states[state])
    return TripRecord(
        frames,
        trip_id=f"{config.name}-{config.seed}",
        driver_id=config.driver_id,
        frame_rate=config.frame_rate,
        seed=config.seed,
        labels=states,
    )


# ---------------------------------------------------------------------------
# presets

CALM: dict[str, dict[str, float]] = {
    "hand_state": {"double_hand": 0.85, "single_hand": 0.15},
    "road_type": {"urban": 1.0},
    "face_orientation": {"on_road": 0.95, "off_road": 0.05},
    "illumination": {"day": 1.0},
    "eye_gaze": {"eyes_on_road": 0.92, "eyes_off_road": 0.08},
    "weather": {"dry": 0.9, "rain": 0.1},
    "manoeuvre": {"stopped": 0.1, "turning": 0.2, "moving": 0.7},
    "surroundings": {"vehicle_not_present": 0.5, "vehicle_present": 0.5},
    "pedestrians": {"not_present": 0.85, "present": 0.15},
}

DISTRACTED: dict[str, dict[str, float]] = {
    "hand_state": {"single_hand": 0.1, "no_hands": 0.9},
    "road_type": {"dual": 0.1, "highway": 0.9},
    "face_orientation": {"on_road": 0.05, "off_road": 0.95},
    "illumination": {"day": 0.1, "night": 0.9},
    "eye_gaze": {"eyes_off_road": 0.3, "eyes_shut": 0.7},
    "weather": {"rain": 0.6, "snow": 0.4},
    "manoeuvre": {"turning": 0.05, "moving": 0.95},
    "surroundings": {"vehicle_not_present": 0.05, "vehicle_present": 0.95},
    "pedestrians": {"not_present": 0.3, "present": 0.7},
}

ESCALATING_START: dict[str, dict[str, float]] = {
    **CALM,
    "hand_state": {"double_hand": 0.95, "single_hand": 0.05},
    "eye_gaze": {"eyes_on_road": 0.95, "eyes_off_road": 0.05},
    "weather": {"dry": 1.0},
    "manoeuvre": {"stopped": 0.2, "turning": 0.3, "moving": 0.5},
    "surroundings": {"vehicle_not_present": 0.8, "vehicle_present": 0.2},
    "pedestrians": {"not_present": 1.0},
}


def safe_cruise(frame_count: int = 1000, seed: int = 0) -> ScenarioConfig:
    return ScenarioConfig(frame_count, seed, (Segment(1.0, CALM, speed_fraction=0.8),), name="safe_cruise")


ESCALATION_ORDER: tuple[tuple[str, ...], ...] = (
    ("road_type", "manoeuvre"),
    ("hand_state", "surroundings"),
    ("eye_gaze", "weather"),
    ("face_orientation", "illumination"),
    ("pedestrians",),
)


def escalating(frame_count: int = 600, seed: int = 0) -> ScenarioConfig:
    """Parameters switch from calm to distracted in overlapping ramps, a few at a time."""
    segments = []
    state = dict(ESCALATING_START)
    for group in ESCALATION_ORDER:
        end = {**state, **{name: DISTRACTED[name] for name in group}}
        segments.append(Segment(1.0, state, end, speed_fraction=0.8))
        state = end
    return ScenarioConfig(frame_count, seed, tuple(segments), name="escalating")


def urban_stop_go(frame_count: int = 1000, seed: int = 0) -> ScenarioConfig:
    moving = {**CALM, "manoeuvre": {"turning": 0.25, "moving": 0.75}, "pedestrians": {"not_present": 0.6, "present": 0.4}}
    waiting = {
        **CALM,
        "manoeuvre": {"stopped": 0.9, "turning": 0.1},
        "hand_state": {"double_hand": 0.4, "single_hand": 0.5, "no_hands": 0.1},
        "eye_gaze": {"eyes_on_road": 0.6, "eyes_off_road": 0.4},
        "pedestrians": {"not_present": 0.3, "present": 0.7},
    }
    segments = tuple(Segment(1.0, moving if i % 2 == 0 else waiting, speed_fraction=0.7) for i in range(10))
    return ScenarioConfig(frame_count, seed, segments, SpeedProcess(reversion=0.35), name="urban_stop_go")


def bimodal(frame_count: int = 1000, seed: int = 0) -> ScenarioConfig:
    """Long alternating calm and heavily distracted stretches."""
    segments = tuple(Segment(1.0, CALM if i % 2 == 0 else DISTRACTED, speed_fraction=0.9) for i in range(8))
    return ScenarioConfig(frame_count, seed, segments, name="bimodal")


def ground_truth_cpts() -> CptSet:
    """A fixed three-state model used to exercise CPT recovery and filtering."""
    catalog = default_catalog()
    outcomes = variable_outcomes(catalog)
    factors = {
        "hand_state": [[0.8, 0.15, 0.05], [0.3, 0.5, 0.2], [0.05, 0.25, 0.7]],
        "face_orientation": [[0.9, 0.1], [0.6, 0.4], [0.2, 0.8]],
        "eye_gaze": [[0.85, 0.1, 0.05], [0.4, 0.5, 0.1], [0.1, 0.4, 0.5]],
        "manoeuvre": [[0.2, 0.3, 0.5], [0.1, 0.3, 0.6], [0.05, 0.15, 0.8]],
        "speed_bin": [[0.5, 0.45, 0.05], [0.3, 0.6, 0.1], [0.1, 0.5, 0.4]],
        "road_type": [[0.6, 0.3, 0.1], [0.4, 0.4, 0.2], [0.2, 0.3, 0.5]],
        "weather": [[0.8, 0.15, 0.05], [0.6, 0.3, 0.1], [0.4, 0.35, 0.25]],
        "illumination": [[0.8, 0.2], [0.6, 0.4], [0.4, 0.6]],
        "surroundings": [[0.6, 0.4], [0.4, 0.6], [0.2, 0.8]],
        "pedestrians": [[0.8, 0.2], [0.6, 0.4], [0.5, 0.5]],
    }
    transition = [[0.9, 0.08, 0.02], [0.1, 0.8, 0.1], [0.03, 0.12, 0.85]]
    prior = [0.5, 0.3, 0.2]
    return CptSet.from_factors(CLASS_LABELS, transition, prior, factors, outcomes)


def dbn_scenario(frame_count: int = 10_000, seed: int = 0, cpts: CptSet | None = None) -> ScenarioConfig:
    return ScenarioConfig(frame_count, seed, (), cpts=cpts or ground_truth_cpts(), name="dbn")


PRESETS = {
    "safe_cruise": safe_cruise,
    "escalating": escalating,
    "urban_stop_go": urban_stop_go,
    "bimodal": bimodal,
    "dbn": dbn_scenario,
}


def preset(name: str, frame_count: int | None = None, seed: int = 0) -> ScenarioConfig:
    key = canonical_label(name)
    if key not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if frame_count is None:
        return PRESETS[key](seed=seed)
    return PRESETS[key](frame_count=frame_count, seed=seed)


_SCENARIO_KEYS = {"name", "frame_count", "frame_rate", "driver_id", "segments", "speed"}
_SEGMENT_KEYS = {"length", "start", "end", "speed_fraction", "speed_fraction_end"}
_SPEED_KEYS = {"reversion", "sigma", "initial_fraction"}


def _only(doc, allowed, where):
    if not isinstance(doc, Mapping):
        raise ValidationError(f"{where} must be an object")
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) in {where}: {sorted(unknown)}")
    return doc


def scenario_from_document(doc: Mapping, seed: int = 0, window: int = DEFAULT_WINDOW) -> ScenarioConfig:
    """Scenario from a JSON-style document::

        {"frame_count": 600, "segments": [{"length": 1, "start": {...}, "end": {...},
          "speed_fraction": 0.8}], "speed": {"reversion": 0.2, "sigma": 1.5}}

    Distributions map parameter -> {action: probability}; omitted parameters
    are uniform. The seed is supplied by the caller.
    """
    _only(doc, _SCENARIO_KEYS, "scenario")
    raw_segments = doc.get("segments")
    if not isinstance(raw_segments, Sequence) or isinstance(raw_segments, (str, bytes)) or not raw_segments:
        raise ValidationError("scenario needs a non-empty 'segments' list")
    segments = []
    for i, s in enumerate(raw_segments):
        _only(s, _SEGMENT_KEYS, f"segment {i}")
        start = s.get("start", {})
        segments.append(
            Segment(
                float(s.get("length", 1.0)),
                start,
                s.get("end"),
                float(s.get("speed_fraction", 0.8)),
                None if s.get("speed_fraction_end") is None else float(s["speed_fraction_end"]),
            )
        )
    speed = SpeedProcess(**{k: float(v) for k, v in _only(doc.get("speed", {}), _SPEED_KEYS, "speed").items()})
    frame_count = doc.get("frame_count", 1000)
    if isinstance(frame_count, bool) or not isinstance(frame_count, int):
        raise ValidationError("frame_count must be an integer")
    config = ScenarioConfig(
        frame_count,
        seed,
        tuple(segments),
        speed,
        name=str(doc.get("name", "custom")),
        frame_rate=float(doc.get("frame_rate", 1.0)),
        window=window,
        driver_id=str(doc.get("driver_id", "synthetic")),
    )
    return config
