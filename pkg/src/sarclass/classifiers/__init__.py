"""Supervised learners behind a common fit/predict surface."""

from .model import (
    DEFAULTS,
    FORMAT_VERSION,
    KINDS,
    ClassifierSpec,
    TrainedModel,
    fit,
    load_model,
    model_from_json,
    model_to_json,
    predict,
    predict_scores,
    save_model,
)

__all__ = [
    "DEFAULTS", "FORMAT_VERSION", "KINDS", "ClassifierSpec", "TrainedModel", "fit",
    "load_model", "model_from_json", "model_to_json", "predict", "predict_scores", "save_model",
]
