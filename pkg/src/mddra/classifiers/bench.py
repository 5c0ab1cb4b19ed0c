"""Model specifications, training, prediction and JSON persistence.

Model document format (version 1)::

    {
      "format": "mddra-model",
      "version": 1,
      "spec": {"name": ..., "family": ..., "hyperparameters": {...}},
      "seed": <int>,
      "n_features": <int>,
      "classes": ["safe", "careless", "dangerous"],
      "estimator": {"kind": ..., "state": {...}}
    }

Floats are written with ``repr`` precision, so loading a document gives back
bit-identical parameters.
"""
from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from mddra.catalog import CLASS_LABELS, ValidationError
from mddra.classifiers.models import (
    DISTANCES,
    ESTIMATORS,
    BaggedTrees,
    Estimator,
    GaussianNaiveBayes,
    KNNClassifier,
    LinearDiscriminant,
    QuadraticDiscriminant,
    SubspaceEnsemble,
)

MODEL_FORMAT = "mddra-model"
MODEL_VERSION = 1


class Family(str, enum.Enum):
    KNN = "KNN"
    LINEAR_DISCRIMINANT = "LinearDiscriminant"
    QUADRATIC_DISCRIMINANT = "QuadraticDiscriminant"
    GAUSSIAN_NAIVE_BAYES = "GaussianNaiveBayes"
    BAGGED_TREES = "BaggedTrees"
    SUBSPACE_KNN = "SubspaceKNN"
    SUBSPACE_DISCRIMINANT = "SubspaceDiscriminant"


_ALLOWED: dict[Family, dict[str, Any]] = {
    Family.KNN: {"k": 10, "distance": "euclidean", "weighted": False},
    Family.LINEAR_DISCRIMINANT: {"ridge": 1e-6},
    Family.QUADRATIC_DISCRIMINANT: {"ridge": 1e-6},
    Family.GAUSSIAN_NAIVE_BAYES: {"var_smoothing": 1e-9},
    Family.BAGGED_TREES: {"tree_count": 50, "max_depth": None, "min_leaf": 1, "bootstrap": True, "seed": None},
    Family.SUBSPACE_KNN: {"member_count": 30, "subspace_dim": None, "k": 1, "distance": "euclidean", "seed": None},
    Family.SUBSPACE_DISCRIMINANT: {"member_count": 30, "subspace_dim": None, "ridge": 1e-6, "seed": None},
}

_POSITIVE_INT = ("k", "tree_count", "min_leaf", "member_count", "subspace_dim")


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        try:
            fam = Family(self.family)
        except ValueError:
            raise ValidationError(f"unknown model family {self.family!r}") from None
        object.__setattr__(self, "family", fam)
        allowed = _ALLOWED[fam]
        unknown = set(self.hyperparameters) - set(allowed)
        if unknown:
            raise ValidationError(f"{fam.value} does not accept {sorted(unknown)}")
        hp = {**allowed, **self.hyperparameters}
        for key in _POSITIVE_INT:
            v = hp.get(key)
            if key in hp and v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 1):
                raise ValidationError(f"{key} must be an integer >= 1, got {v!r}")
        if hp.get("max_depth") is not None and (not isinstance(hp["max_depth"], int) or hp["max_depth"] < 0):
            raise ValidationError("max_depth must be an integer >= 0 or null")
        if "distance" in hp and hp["distance"] not in DISTANCES:
            raise ValidationError(f"distance must be one of {DISTANCES}")
        for key in ("ridge", "var_smoothing"):
            if key in hp and not (isinstance(hp[key], (int, float)) and hp[key] >= 0):
                raise ValidationError(f"{key} must be >= 0")
        object.__setattr__(self, "hyperparameters", hp)
        if not self.name:
            object.__setattr__(self, "name", fam.value)

    def to_document(self) -> dict[str, Any]:
        return {"name": self.name, "family": self.family.value, "hyperparameters": dict(self.hyperparameters)}

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "ModelSpec":
        try:
            return cls(doc["family"], dict(doc.get("hyperparameters", {})), doc.get("name", ""))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed model spec: {exc}") from None


#: named presets; the KNN variants follow the conventional meaning of their names
PRESETS: dict[str, ModelSpec] = {
    spec.name: spec
    for spec in (
        ModelSpec(Family.KNN, {"k": 1}, "Fine KNN"),
        ModelSpec(Family.KNN, {"k": 10}, "Medium KNN"),
        ModelSpec(Family.KNN, {"k": 100}, "Coarse KNN"),
        ModelSpec(Family.KNN, {"k": 10, "distance": "cosine"}, "Cosine KNN"),
        ModelSpec(Family.KNN, {"k": 10, "distance": "cubic"}, "Cubic KNN"),
        ModelSpec(Family.KNN, {"k": 10, "weighted": True}, "Weighted KNN"),
        ModelSpec(Family.LINEAR_DISCRIMINANT, {}, "Linear Discriminant"),
        ModelSpec(Family.QUADRATIC_DISCRIMINANT, {}, "Quadratic Discriminant"),
        ModelSpec(Family.GAUSSIAN_NAIVE_BAYES, {}, "Gaussian Naive Bayes"),
        ModelSpec(Family.BAGGED_TREES, {"tree_count": 50}, "Bagged Trees"),
        ModelSpec(Family.SUBSPACE_DISCRIMINANT, {}, "Subspace Discriminant"),
        ModelSpec(Family.SUBSPACE_KNN, {}, "Subspace KNN"),
    )
}

_PRESET_KEYS = {name.lower().replace(" ", "_"): name for name in PRESETS}


def model_spec(name: str) -> ModelSpec:
    """Preset by display name ("Fine KNN") or snake-case key ("fine_knn")."""
    key = _PRESET_KEYS.get(name.lower().replace(" ", "_").replace("-", "_"))
    if key is None:
        raise ValidationError(f"unknown model {name!r}; expected one of {sorted(_PRESET_KEYS)}")
    return PRESETS[key]


def _build(spec: ModelSpec, seed: int) -> Estimator:
    hp = spec.hyperparameters
    fam = spec.family
    member_seed = seed if hp.get("seed") is None else hp["seed"]
    if fam is Family.KNN:
        return KNNClassifier(hp["k"], hp["distance"], hp["weighted"])
    if fam is Family.LINEAR_DISCRIMINANT:
        return LinearDiscriminant(hp["ridge"])
    if fam is Family.QUADRATIC_DISCRIMINANT:
        return QuadraticDiscriminant(hp["ridge"])
    if fam is Family.GAUSSIAN_NAIVE_BAYES:
        return GaussianNaiveBayes(hp["var_smoothing"])
    if fam is Family.BAGGED_TREES:
        return BaggedTrees(hp["tree_count"], hp["max_depth"], hp["min_leaf"], hp["bootstrap"], member_seed)
    if fam is Family.SUBSPACE_KNN:
        params = {"k": hp["k"], "distance": hp["distance"]}
        return SubspaceEnsemble("knn", hp["member_count"], hp["subspace_dim"], member_seed, params)
    return SubspaceEnsemble("discriminant", hp["member_count"], hp["subspace_dim"], member_seed, {"ridge": hp["ridge"]})


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: ModelSpec
    estimator: Estimator
    n_features: int
    seed: int
    train_time: float = 0.0

    @property
    def name(self) -> str:
        return self.spec.name


def train(spec: ModelSpec, X, y, seed: int = 0) -> TrainedModel:
    """Fit ``spec`` on features ``X`` and class codes ``y``.

    Ensemble members draw from a seed taken from the ``seed`` hyperparameter
    when set, otherwise from ``seed``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("training data is empty")
    est = _build(spec, int(seed))
    t0 = time.perf_counter()
    est.fit(X, y)
    elapsed = time.perf_counter() - t0
    return TrainedModel(spec, est, X.shape[1], int(seed), elapsed)


def predict(model: TrainedModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Class codes and per-class scores for one vector or a matrix of rows."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if X.shape[-1] != model.n_features:
        raise ValidationError(f"expected {model.n_features} features, got {X.shape[-1]}")
    scores = model.estimator.scores(X)
    codes = np.argmax(scores, axis=1)
    if single:
        return codes[:1], scores[:1]
    return codes, scores


def predict_labels(model: TrainedModel, X) -> list[str]:
    codes, _ = predict(model, X)
    return [CLASS_LABELS[c] for c in codes]


def model_to_document(model: TrainedModel) -> dict[str, Any]:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "spec": model.spec.to_document(),
        "seed": model.seed,
        "n_features": model.n_features,
        "classes": list(CLASS_LABELS),
        "estimator": {"kind": model.estimator.kind, "state": model.estimator.state()},
    }


def model_from_document(doc: Mapping[str, Any]) -> TrainedModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ValidationError("not a model document")
    if doc.get("version") != MODEL_VERSION:
        raise ValidationError(f"unsupported model document version {doc.get('version')!r}")
    if list(doc.get("classes", [])) != list(CLASS_LABELS):
        raise ValidationError("model was trained on a different class set")
    try:
        est_cls = ESTIMATORS[doc["estimator"]["kind"]]
        est = est_cls.from_state(doc["estimator"]["state"])
        return TrainedModel(ModelSpec.from_document(doc["spec"]), est, int(doc["n_features"]), int(doc["seed"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model document: {exc}") from None


def dumps_model(model: TrainedModel) -> str:
    return json.dumps(model_to_document(model), sort_keys=True, allow_nan=False)


def loads_model(text: str) -> TrainedModel:
    return model_from_document(json.loads(text))
