"""Classifier bench: feature extraction, models, evaluation and rank tests."""
from mddra.classifiers.bench import (
    PRESETS,
    Family,
    ModelSpec,
    TrainedModel,
    dumps_model,
    loads_model,
    model_from_document,
    model_spec,
    model_to_document,
    predict,
    predict_labels,
    train,
)
from mddra.classifiers.evaluation import (
    CrossValidation,
    EvaluationReport,
    confusion_matrix,
    evaluate,
    kfold_cv,
    report_from_predictions,
    reports_csv,
    stratified_folds,
)
from mddra.classifiers.features import FEATURE_NAMES, dataset, encode_labels, trip_features
from mddra.classifiers.ranking import RankEntry, RankTable, average_ranks, kruskal_wallis_h, kruskal_wallis_ranks, rank_z, read_entries_csv

__all__ = [
    "CrossValidation",
    "EvaluationReport",
    "FEATURE_NAMES",
    "Family",
    "ModelSpec",
    "PRESETS",
    "RankEntry",
    "RankTable",
    "TrainedModel",
    "average_ranks",
    "confusion_matrix",
    "dataset",
    "dumps_model",
    "encode_labels",
    "evaluate",
    "kfold_cv",
    "kruskal_wallis_h",
    "kruskal_wallis_ranks",
    "loads_model",
    "model_from_document",
    "model_spec",
    "model_to_document",
    "predict",
    "predict_labels",
    "rank_z",
    "read_entries_csv",
    "report_from_predictions",
    "reports_csv",
    "stratified_folds",
    "train",
    "trip_features",
]
