"""Parameter/weight catalog, severity bands and configuration loading."""
from __future__ import annotations

import bisect
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence


class ValidationError(ValueError):
    """Input that violates a documented schema or invariant."""


class SpeedMode(str, enum.Enum):
    SURROUNDINGS_MULTIPLIER = "surroundings_multiplier"
    INDEPENDENT_TERM = "independent_term"


class DistractionClass(str, enum.Enum):
    SAFE = "Safe"
    CARELESS = "Careless"
    DANGEROUS = "Dangerous"
    EXTREMELY_DANGEROUS = "Extremely Dangerous"

    @property
    def label(self) -> str:
        """Three-class label used by the DBN and classifier bench."""
        if self in (DistractionClass.DANGEROUS, DistractionClass.EXTREMELY_DANGEROUS):
            return "dangerous"
        return self.name.lower()

    @property
    def is_dangerous(self) -> bool:
        return self in (DistractionClass.DANGEROUS, DistractionClass.EXTREMELY_DANGEROUS)


#: three-class labels in tie-break order
CLASS_LABELS: tuple[str, ...] = ("safe", "careless", "dangerous")


def canonical_label(text: str) -> str:
    """Lower-case, underscore-separated form of an action or parameter name."""
    return "_".join(str(text).strip().lower().replace("-", " ").split())


@dataclass(frozen=True)
class ParameterSpec:
    """One observable parameter with its ordered, weighted actions."""

    name: str
    actions: tuple[tuple[str, int], ...]
    max_weight: int

    def __post_init__(self):
        if not self.actions:
            raise ValidationError(f"parameter {self.name!r} has no actions")
        labels = [a for a, _ in self.actions]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"parameter {self.name!r} has duplicate action labels")
        weights = [w for _, w in self.actions]
        for w in weights:
            if isinstance(w, bool) or not isinstance(w, int):
                raise ValidationError(f"parameter {self.name!r}: weight {w!r} is not an integer")
            if w < 0:
                raise ValidationError(f"parameter {self.name!r}: negative weight {w}")
        if any(b <= a for a, b in zip(weights, weights[1:])):
            raise ValidationError(
                f"parameter {self.name!r}: weights must be distinct and non-decreasing"
            )
        if self.max_weight < 1:
            raise ValidationError(f"parameter {self.name!r}: max_weight must be >= 1")
        if self.max_weight != max(weights):
            raise ValidationError(
                f"parameter {self.name!r}: max_weight {self.max_weight} != largest weight {max(weights)}"
            )

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.actions)

    def index(self, action: str) -> int:
        key = canonical_label(action)
        for i, (label, _) in enumerate(self.actions):
            if label == key:
                return i
        raise ValidationError(f"unknown action {action!r} for parameter {self.name!r}")

    def weight(self, action: str) -> int:
        return self.actions[self.index(action)][1]


def _spec(name: str, *actions: tuple[str, int]) -> ParameterSpec:
    return ParameterSpec(name, tuple(actions), max(w for _, w in actions))


DEFAULT_PARAMETERS: tuple[ParameterSpec, ...] = (
    _spec("hand_state", ("double_hand", 0), ("single_hand", 1), ("no_hands", 2)),
    _spec("road_type", ("urban", 1), ("dual", 2), ("highway", 3)),
    _spec("face_orientation", ("on_road", 1), ("off_road", 2)),
    _spec("illumination", ("day", 1), ("night", 2)),
    _spec("eye_gaze", ("eyes_on_road", 0), ("eyes_off_road", 1), ("eyes_shut", 2)),
    _spec("weather", ("dry", 1), ("rain", 2), ("snow", 3)),
    _spec("manoeuvre", ("stopped", 0), ("turning", 1), ("moving", 2)),
    _spec("surroundings", ("vehicle_not_present", 0), ("vehicle_present", 1)),
    _spec("pedestrians", ("not_present", 0), ("present", 1)),
)

PARAMETER_NAMES: tuple[str, ...] = tuple(p.name for p in DEFAULT_PARAMETERS)

DEFAULT_SPEED_LIMITS: dict[str, float] = {"urban": 30.0, "dual": 60.0, "highway": 70.0}

DEFAULT_WINDOW = 5

# alternative spellings accepted in config documents
_NAME_ALIASES = {
    "state_of_hand": "hand_state",
    "hand": "hand_state",
    "manoeuvres": "manoeuvre",
    "maneuver": "manoeuvre",
    "maneuvers": "manoeuvre",
    "time_of_day": "illumination",
    "surrounding": "surroundings",
    "pedestrian": "pedestrians",
}


@dataclass(frozen=True)
class ParameterCatalog:
    parameters: tuple[ParameterSpec, ...] = DEFAULT_PARAMETERS
    speed_limits: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_SPEED_LIMITS))
    speed_mode: SpeedMode = SpeedMode.SURROUNDINGS_MULTIPLIER

    def __post_init__(self):
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate parameter names")
        if names != list(PARAMETER_NAMES):
            raise ValidationError(f"catalog must define parameters {PARAMETER_NAMES} in order")
        for label in self.param("road_type").labels:
            limit = self.speed_limits.get(label)
            if limit is None:
                raise ValidationError(f"missing speed limit for road type {label!r}")
            if not (math.isfinite(limit) and limit > 0):
                raise ValidationError(f"speed limit for {label!r} must be positive")

    def param(self, name: str) -> ParameterSpec:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    def speed_limit(self, road_type: str) -> float:
        return float(self.speed_limits[canonical_label(road_type)])


def default_catalog() -> ParameterCatalog:
    return ParameterCatalog()


@dataclass(frozen=True)
class MddraConfig:
    """A catalog plus the aggregation window length."""

    catalog: ParameterCatalog = field(default_factory=ParameterCatalog)
    window: int = DEFAULT_WINDOW


_TOP_KEYS = {"parameters", "speed_limits", "speed_mode", "window"}
_PARAM_KEYS = {"name", "actions", "max_weight"}
_ACTION_KEYS = {"label", "weight"}


def _reject_unknown(obj: Mapping, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _parse_parameter(entry: Any, defaults: Mapping[str, ParameterSpec]) -> ParameterSpec:
    if not isinstance(entry, Mapping):
        raise ValidationError("parameter entries must be objects")
    _reject_unknown(entry, _PARAM_KEYS, "parameter")
    if "name" not in entry:
        raise ValidationError("parameter entry without a name")
    name = canonical_label(entry["name"])
    name = _NAME_ALIASES.get(name, name)
    if name not in defaults:
        raise ValidationError(f"unknown parameter {entry['name']!r}")
    if "actions" in entry:
        raw = entry["actions"]
        if not isinstance(raw, Sequence) or isinstance(raw, (str, bytes)):
            raise ValidationError(f"parameter {name!r}: actions must be a list")
        actions = []
        for a in raw:
            if not isinstance(a, Mapping):
                raise ValidationError(f"parameter {name!r}: actions must be objects")
            _reject_unknown(a, _ACTION_KEYS, f"action of {name!r}")
            if "label" not in a or "weight" not in a:
                raise ValidationError(f"parameter {name!r}: action needs label and weight")
            actions.append((canonical_label(a["label"]), a["weight"]))
        actions = tuple(actions)
    else:
        actions = defaults[name].actions
    if "max_weight" in entry:
        max_weight = entry["max_weight"]
        if isinstance(max_weight, bool) or not isinstance(max_weight, int):
            raise ValidationError(f"parameter {name!r}: max_weight must be an integer")
    else:
        weights = [w for _, w in actions if isinstance(w, int)]
        max_weight = max(weights) if weights else 0
    return ParameterSpec(name, actions, max_weight)


def load_config(document: Mapping[str, Any] | None) -> MddraConfig:
    """Validate a config document; absent fields fall back to the defaults."""
    document = {} if document is None else document
    if not isinstance(document, Mapping):
        raise ValidationError("config document must be an object")
    _reject_unknown(document, _TOP_KEYS, "config")

    defaults = {p.name: p for p in DEFAULT_PARAMETERS}
    overrides: dict[str, ParameterSpec] = {}
    raw_params = document.get("parameters", [])
    if not isinstance(raw_params, Sequence) or isinstance(raw_params, (str, bytes)):
        raise ValidationError("'parameters' must be a list")
    for entry in raw_params:
        spec = _parse_parameter(entry, defaults)
        if spec.name in overrides:
            raise ValidationError(f"duplicate parameter name {spec.name!r}")
        overrides[spec.name] = spec
    parameters = tuple(overrides.get(p.name, p) for p in DEFAULT_PARAMETERS)

    limits = dict(DEFAULT_SPEED_LIMITS)
    raw_limits = document.get("speed_limits", {})
    if not isinstance(raw_limits, Mapping):
        raise ValidationError("'speed_limits' must be an object")
    for key, value in raw_limits.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"speed limit for {key!r} must be a number")
        limits[canonical_label(key)] = float(value)

    try:
        mode = SpeedMode(document.get("speed_mode", SpeedMode.SURROUNDINGS_MULTIPLIER.value))
    except ValueError:
        raise ValidationError(f"unknown speed_mode {document.get('speed_mode')!r}") from None

    window = document.get("window", DEFAULT_WINDOW)
    if isinstance(window, bool) or not isinstance(window, int) or window < 1:
        raise ValidationError("'window' must be an integer >= 1")

    catalog = ParameterCatalog(parameters, limits, mode)
    return MddraConfig(catalog, window)


def load_catalog(document: Mapping[str, Any] | None) -> ParameterCatalog:
    return load_config(document).catalog


def config_to_document(config: MddraConfig) -> dict[str, Any]:
    cat = config.catalog
    return {
        "parameters": [
            {
                "name": p.name,
                "actions": [{"label": a, "weight": w} for a, w in p.actions],
                "max_weight": p.max_weight,
            }
            for p in cat.parameters
        ],
        "speed_limits": {k: cat.speed_limits[k] for k in sorted(cat.speed_limits)},
        "speed_mode": cat.speed_mode.value,
        "window": config.window,
    }


def read_config(path: str | Path | None) -> MddraConfig:
    if path is None:
        return MddraConfig()
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from None
    return load_config(document)


@dataclass(frozen=True)
class SeverityBand:
    lower: float
    upper: float
    color: str
    impact: str
    distraction_class: DistractionClass
    rank: int
    consequence: str
    matrix_label: str

    def contains(self, score: float) -> bool:
        if self.upper >= 1.0:
            return self.lower <= score <= 1.0
        return self.lower <= score < self.upper


_DC = DistractionClass
BANDS: tuple[SeverityBand, ...] = (
    SeverityBand(0.0, 0.1, "Light Green", "No Impact", _DC.SAFE, 1, "No distraction", "No Impact"),
    SeverityBand(0.1, 0.25, "Green", "Slight Impact", _DC.SAFE, 2, "Slight distraction", "Slight/Very low"),
    SeverityBand(0.25, 0.4, "Yellow", "Low", _DC.SAFE, 3, "Noticeable distraction", "Low"),
    SeverityBand(0.4, 0.6, "Dark Yellow", "Medium", _DC.CARELESS, 4, "Distraction detected", "Medium"),
    SeverityBand(0.6, 0.8, "Orange", "High", _DC.DANGEROUS, 5, "Frequent distractions", "High"),
    SeverityBand(0.8, 0.9, "Dark Orange", "Very High", _DC.DANGEROUS, 6, "Casualty prone", "Very High"),
    SeverityBand(0.9, 1.0, "Red", "Extreme", _DC.EXTREMELY_DANGEROUS, 7, "Severe casualty prone", "Extreme"),
)

_LOWERS = [b.lower for b in BANDS]


def _check_score(score: float) -> float:
    score = float(score)
    if not (0.0 <= score <= 1.0):
        raise ValidationError(f"severity score {score!r} outside [0, 1]")
    return score


def band_for(score: float) -> SeverityBand:
    """The band whose half-open interval contains ``score`` (top band closed at 1)."""
    score = _check_score(score)
    return BANDS[bisect.bisect_right(_LOWERS, score) - 1]


def severity_rank(band: SeverityBand) -> int:
    if band not in BANDS:
        raise ValidationError(f"not a canonical band: {band!r}")
    return band.rank
