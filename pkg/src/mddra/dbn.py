"""Discrete dynamic-Bayesian severity filter.

The severity state S_t is hidden; each frame emits one categorical outcome
per observation family (driver state, environment, surroundings,
pedestrians and, optionally, an externally supplied distraction
identifier). Families are conditionally independent given S_t, and the
state follows a first-order Markov chain. Filtering is the forward
recursion::

    belief'(s') ∝ prod_F P(obs_F | s') * sum_s P(s' | s) belief(s)

A family's outcome is the joint value of its variables, enumerated in
mixed radix with the first variable most significant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from mddra.catalog import CLASS_LABELS, ParameterCatalog, ValidationError, canonical_label, default_catalog
from mddra.severity import FrameObservation

SPEED_BINS: tuple[str, ...] = ("below_half_limit", "legal", "over_limit")

#: family name -> variables; ``speed_bin`` is derived from speed and road type
DEFAULT_FAMILIES: dict[str, tuple[str, ...]] = {
    "driver": ("hand_state", "face_orientation", "eye_gaze", "manoeuvre", "speed_bin"),
    "environment": ("road_type", "weather", "illumination"),
    "surroundings": ("surroundings",),
    "pedestrians": ("pedestrians",),
}
IDENTIFIER = "identifier"


def speed_bin(speed: float, limit: float) -> int:
    if speed < 0.5 * limit:
        return 0
    if speed <= limit:
        return 1
    return 2


@dataclass(frozen=True, eq=False)
class FamilyTable:
    variables: tuple[str, ...]
    outcomes: tuple[tuple[str, ...], ...]
    table: np.ndarray  # (n_states, n_joint_outcomes)

    @property
    def radix(self) -> tuple[int, ...]:
        return tuple(len(o) for o in self.outcomes)

    def encode(self, values: Sequence[int]) -> int:
        code = 0
        for v, r in zip(values, self.radix):
            code = code * r + v
        return code

    def decode(self, code: int) -> tuple[int, ...]:
        out = []
        for r in reversed(self.radix):
            code, v = divmod(code, r)
            out.append(v)
        return tuple(reversed(out))


@dataclass(frozen=True, eq=False)
class CptSet:
    states: tuple[str, ...]
    families: dict[str, FamilyTable]
    transition: np.ndarray
    prior: np.ndarray

    def __post_init__(self):
        s = len(self.states)
        tables = [("transition", self.transition), ("prior", self.prior[None, :])]
        tables += [(name, f.table) for name, f in self.families.items()]
        for name, t in tables:
            if t.shape[0] != (1 if name == "prior" else s):
                raise ValidationError(f"table {name!r} has the wrong number of rows")
            if np.any(t < 0) or not np.allclose(t.sum(axis=1), 1.0, atol=1e-9, rtol=0):
                raise ValidationError(f"table {name!r} rows must be non-negative and sum to 1")
        if self.transition.shape != (s, s):
            raise ValidationError("transition must be square over the state space")

    @classmethod
    def from_factors(
        cls,
        states: Sequence[str],
        transition,
        prior,
        factors: Mapping[str, Any],
        outcomes: Mapping[str, Sequence[str]],
        families: Mapping[str, Sequence[str]] | None = None,
    ) -> "CptSet":
        """Build joint family tables from independent per-variable tables.

        ``factors[var]`` is an (n_states, n_outcomes) array.
        """
        families = DEFAULT_FAMILIES if families is None else families
        built = {}
        for name, variables in families.items():
            table = np.ones((len(states), 1))
            for var in variables:
                f = np.asarray(factors[var], dtype=np.float64)
                table = (table[:, :, None] * f[:, None, :]).reshape(len(states), -1)
            built[name] = FamilyTable(tuple(variables), tuple(tuple(outcomes[v]) for v in variables), table)
        return cls(tuple(states), built, np.asarray(transition, dtype=float), np.asarray(prior, dtype=float))

    def to_document(self) -> dict[str, Any]:
        return {
            "states": list(self.states),
            "transition": self.transition.tolist(),
            "prior": self.prior.tolist(),
            "families": {
                name: {
                    "variables": list(f.variables),
                    "outcomes": [list(o) for o in f.outcomes],
                    "table": f.table.tolist(),
                }
                for name, f in self.families.items()
            },
        }

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "CptSet":
        try:
            families = {
                name: FamilyTable(
                    tuple(f["variables"]),
                    tuple(tuple(o) for o in f["outcomes"]),
                    np.asarray(f["table"], dtype=np.float64),
                )
                for name, f in doc["families"].items()
            }
            return cls(
                tuple(doc["states"]),
                families,
                np.asarray(doc["transition"], dtype=np.float64),
                np.asarray(doc["prior"], dtype=np.float64),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed CPT document: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=1, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "CptSet":
        return cls.from_document(json.loads(text))


def variable_outcomes(catalog: ParameterCatalog) -> dict[str, tuple[str, ...]]:
    out = {p.name: p.labels for p in catalog.parameters}
    out["speed_bin"] = SPEED_BINS
    return out


def frame_values(frame: FrameObservation, catalog: ParameterCatalog) -> dict[str, int]:
    """Outcome index of every discrete variable for one frame."""
    values = {p.name: p.index(a) for p, a in zip(catalog.parameters, frame.actions())}
    values["speed_bin"] = speed_bin(frame.speed, catalog.speed_limit(frame.road_type))
    return values


def discretize(
    frame: FrameObservation,
    catalog: ParameterCatalog,
    cpts_or_families,
    identifier: str | None = None,
) -> dict[str, int]:
    """Joint outcome index per family for ``frame``."""
    families = cpts_or_families.families if isinstance(cpts_or_families, CptSet) else cpts_or_families
    values = frame_values(frame, catalog)
    obs = {}
    for name, fam in families.items():
        if name == IDENTIFIER:
            if identifier is not None:
                obs[name] = fam.outcomes[0].index(canonical_label(identifier))
            continue
        obs[name] = fam.encode([values[v] for v in fam.variables])
    return obs


def _split_item(item):
    if len(item) == 2:
        return item[0], item[1], None
    if len(item) == 3:
        return item
    raise ValidationError("labelled items must be (frame, label) or (frame, label, identifier)")


def estimate_cpts(
    labeled_trips: Iterable[Sequence[tuple]],
    alpha: float = 1.0,
    catalog: ParameterCatalog | None = None,
    states: Sequence[str] = CLASS_LABELS,
    families: Mapping[str, Sequence[str]] | None = None,
) -> CptSet:
    """Additively smoothed frequency estimates of every table.

    Items are ``(frame, label)`` or ``(frame, label, identifier)``; the
    identifier family is only created when some item supplies one.
    """
    if not alpha > 0:
        raise ValidationError("smoothing alpha must be > 0")
    catalog = catalog or default_catalog()
    families = DEFAULT_FAMILIES if families is None else families
    states = tuple(states)
    state_idx = {s: i for i, s in enumerate(states)}
    outcomes = variable_outcomes(catalog)
    trips = [list(t) for t in labeled_trips]
    identifiers = sorted(
        {canonical_label(_split_item(it)[2]) for t in trips for it in t if _split_item(it)[2] is not None}
    )
    skeleton = {
        name: FamilyTable(tuple(v), tuple(outcomes[x] for x in v), np.empty((0, 0)))
        for name, v in families.items()
    }
    if identifiers:
        skeleton[IDENTIFIER] = FamilyTable((IDENTIFIER,), (tuple(identifiers),), np.empty((0, 0)))

    S = len(states)
    counts = {name: np.zeros((S, int(np.prod(f.radix)))) for name, f in skeleton.items()}
    trans = np.zeros((S, S))
    state_counts = np.zeros(S)
    n_frames = 0
    for trip in trips:
        prev = None
        for item in trip:
            frame, label, ident = _split_item(item)
            key = canonical_label(label)
            if key not in state_idx:
                raise ValidationError(f"unknown class label {label!r}")
            s = state_idx[key]
            obs = discretize(frame, catalog, skeleton, ident)
            for name, o in obs.items():
                counts[name][s, o] += 1.0
            state_counts[s] += 1.0
            if prev is not None:
                trans[prev, s] += 1.0
            prev = s
            n_frames += 1
    if n_frames == 0:
        raise ValidationError("no labelled frames to estimate from")

    def normalize(c):
        c = c + alpha
        return c / c.sum(axis=1, keepdims=True)

    tables = {
        name: FamilyTable(f.variables, f.outcomes, normalize(counts[name])) for name, f in skeleton.items()
    }
    prior = normalize(state_counts[None, :])[0]
    return CptSet(states, tables, normalize(trans), prior)


@dataclass(frozen=True, eq=False)
class BeliefState:
    probs: np.ndarray
    states: tuple[str, ...] = CLASS_LABELS

    @property
    def argmax(self) -> str:
        return self.states[int(np.argmax(self.probs))]


def uniform_belief(cpts: CptSet) -> BeliefState:
    s = len(cpts.states)
    return BeliefState(np.full(s, 1.0 / s), cpts.states)


def filter_step(
    belief: BeliefState,
    cpts: CptSet,
    observation: Mapping[str, int],
    family_order: Sequence[str] | None = None,
) -> BeliefState:
    """One predict-update step; families absent from ``observation`` are skipped."""
    probs = np.asarray(belief.probs, dtype=np.float64)
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValidationError("belief must be normalised")
    predicted = probs @ cpts.transition
    lik = np.ones(len(cpts.states))
    for name in family_order or cpts.families:
        if name in observation:
            lik = lik * cpts.families[name].table[:, observation[name]]
    post = lik * predicted
    z = post.sum()
    if not z > 0:
        raise ValidationError("observation has zero likelihood under every state")
    return BeliefState(post / z, cpts.states)


def filter_trip(
    trip,
    cpts: CptSet,
    initial_belief: BeliefState | None = None,
    catalog: ParameterCatalog | None = None,
    identifiers: Sequence[str] | None = None,
) -> list[BeliefState]:
    """Forward-filter every frame of ``trip`` (a TripRecord or frame list)."""
    catalog = catalog or default_catalog()
    frames = trip.frames if hasattr(trip, "frames") else list(trip)
    if not frames:
        raise ValidationError("cannot filter an empty trip")
    belief = initial_belief or BeliefState(cpts.prior.copy(), cpts.states)
    out = []
    for i, frame in enumerate(frames):
        ident = identifiers[i] if identifiers is not None else None
        belief = filter_step(belief, cpts, discretize(frame, catalog, cpts, ident))
        out.append(belief)
    return out
