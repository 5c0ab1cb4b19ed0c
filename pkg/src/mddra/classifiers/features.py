"""Per-frame feature vectors for the classifier bench."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from mddra.catalog import CLASS_LABELS, DEFAULT_WINDOW, PARAMETER_NAMES, ParameterCatalog, ValidationError, default_catalog
from mddra.severity import encode_frames, frame_scores, term_matrix
from mddra import _kernels

FEATURE_NAMES: tuple[str, ...] = PARAMETER_NAMES + ("speed_factor", "previous_aggregate")


def trip_features(trip, catalog: ParameterCatalog | None = None, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Normalized terms, speed factor and the previous frame's aggregate severity.

    The first frame has no predecessor; its previous aggregate is 0.
    """
    catalog = catalog or default_catalog()
    codes, speeds = encode_frames(trip.frames, catalog)
    mat, sf = term_matrix(codes, speeds, catalog)
    agg = np.clip(_kernels.sliding_mean(frame_scores(codes, speeds, catalog), window), 0.0, 1.0)
    prev = np.concatenate(([0.0], agg[:-1]))
    return np.column_stack([mat, sf, prev])


def encode_labels(labels: Sequence[str]) -> np.ndarray:
    lookup = {c: i for i, c in enumerate(CLASS_LABELS)}
    try:
        return np.array([lookup[l] for l in labels], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"unknown class label {exc.args[0]!r}") from None


def dataset(trips, catalog: ParameterCatalog | None = None, window: int = DEFAULT_WINDOW):
    """Stack features and encoded labels of several labelled trips."""
    X, y = [], []
    for trip in trips:
        if trip.labels is None:
            raise ValidationError(f"trip {trip.trip_id!r} has no labels")
        X.append(trip_features(trip, catalog, window))
        y.append(encode_labels(trip.labels))
    return np.vstack(X), np.concatenate(y)
