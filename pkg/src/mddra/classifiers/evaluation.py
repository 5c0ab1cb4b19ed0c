"""Confusion matrices, evaluation reports and stratified k-fold cross-validation."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from mddra.catalog import CLASS_LABELS, ValidationError
from mddra.classifiers.bench import ModelSpec, TrainedModel, predict, train

N_CLASSES = len(CLASS_LABELS)


def confusion_matrix(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    """Counts with actual classes on rows and predicted classes on columns."""
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise ValidationError("y_true and y_pred must be 1-D and of equal length")
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (t, p), 1)
    return m


@dataclass(frozen=True)
class EvaluationReport:
    model: str
    confusion_matrix: tuple[tuple[int, ...], ...]
    accuracy: float  # percent
    per_class_recall: tuple[float | None, ...]
    false_discovery_rate: tuple[float | None, ...]
    n: int
    train_time: float = 0.0
    predict_time: float = 0.0

    @property
    def predict_throughput(self) -> float:
        """Predictions per second; infinite when the clock did not advance."""
        return self.n / self.predict_time if self.predict_time > 0 else math.inf

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.confusion_matrix, dtype=np.int64)

    def deterministic_document(self) -> dict[str, Any]:
        """Every field that does not depend on wall-clock timing."""
        return {
            "model": self.model,
            "classes": list(CLASS_LABELS),
            "confusion_matrix": [list(r) for r in self.confusion_matrix],
            "accuracy": self.accuracy,
            "per_class_recall": list(self.per_class_recall),
            "false_discovery_rate": list(self.false_discovery_rate),
            "n": self.n,
        }

    def to_document(self, timing: bool = False) -> dict[str, Any]:
        doc = self.deterministic_document()
        if timing:
            doc.update(train_time=self.train_time, predict_time=self.predict_time, predict_throughput=self.predict_throughput)
        return doc


def report_from_predictions(model: str, y_true, y_pred, train_time: float = 0.0, predict_time: float = 0.0) -> EvaluationReport:
    m = confusion_matrix(y_true, y_pred)
    total = int(m.sum())
    if total == 0:
        raise ValidationError("test set is empty")
    diag = np.diag(m)
    rows = m.sum(axis=1)
    cols = m.sum(axis=0)
    recall = tuple(float(d / r) if r else None for d, r in zip(diag, rows))
    fdr = tuple(float((c - d) / c) if c else None for d, c in zip(diag, cols))
    return EvaluationReport(
        model=model,
        confusion_matrix=tuple(tuple(int(v) for v in row) for row in m),
        accuracy=100.0 * float(diag.sum()) / total,
        per_class_recall=recall,
        false_discovery_rate=fdr,
        n=total,
        train_time=train_time,
        predict_time=predict_time,
    )


def evaluate(model: TrainedModel, X, y) -> EvaluationReport:
    """Predict every test row and tally the results; prediction is timed with a monotonic clock."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("test set is empty")
    t0 = time.perf_counter()
    pred, _ = predict(model, X)
    elapsed = time.perf_counter() - t0
    return report_from_predictions(model.name, y, pred, model.train_time, elapsed)


def reports_csv(reports: Sequence[EvaluationReport], timing: bool = False) -> str:
    """Model, Acc. %, Speed (obs/sec), T-Time (sec). Timing cells are blank unless requested."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Model", "Acc. %", "Speed", "T-Time"])
    for r in reports:
        speed = f"{r.predict_throughput:.1f}" if timing else ""
        ttime = f"{r.train_time:.4f}" if timing else ""
        w.writerow([r.model, f"{r.accuracy:.1f}", speed, ttime])
    return buf.getvalue()


def stratified_folds(y, folds: int, seed: int) -> np.ndarray:
    """Fold index per sample.

    Each class is shuffled with the seeded generator and dealt round-robin;
    the deal continues across classes so fold sizes differ by at most one.
    """
    y = np.asarray(y, dtype=np.int64)
    n = y.shape[0]
    if folds < 2:
        raise ValidationError("folds must be >= 2")
    if folds > n:
        raise ValidationError(f"folds ({folds}) exceeds the number of samples ({n})")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        members = members[rng.permutation(members.size)]
        assignment[members] = (offset + np.arange(members.size)) % folds
        offset += members.size
    return assignment


@dataclass(frozen=True)
class CrossValidation:
    model: str
    fold_accuracies: tuple[float, ...]  # fractions in [0, 1]
    assignment: tuple[int, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        """Sample standard deviation over folds."""
        return float(np.std(self.fold_accuracies, ddof=1))

    def to_document(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "folds": len(self.fold_accuracies),
            "fold_accuracies": list(self.fold_accuracies),
            "mean": self.mean,
            "std": self.std,
        }


def kfold_cv(spec: ModelSpec, X, y, folds: int, seed: int = 0) -> CrossValidation:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    assignment = stratified_folds(y, folds, seed)
    accs = []
    for f in range(folds):
        test = assignment == f
        model = train(spec, X[~test], y[~test], seed)
        pred, _ = predict(model, X[test])
        accs.append(float(np.mean(pred == y[test])))
    return CrossValidation(spec.name, tuple(accs), tuple(int(a) for a in assignment))
