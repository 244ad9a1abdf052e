"""Text in, label out: preprocessing, features and a classifier trained together."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .baselines import PatternMatcher, default_matcher
from .classifiers import ClassifierSpec, TrainedModel, fit
from .corpus import Dataset, Label, Task
from .errors import DataError
from .features import Vectorizer, default_selection, fisher_scores, fit_vectorizer, select_top_k
from .preprocess import PreprocessConfig, preprocess


@dataclass(frozen=True)
class FeatureConfig:
    ngram_min: int = 1
    ngram_max: int = 2
    top_k: int | None = None  # None: every positive-score feature, capped at 5000
    select: bool = True
    normalize: bool = True

    def __post_init__(self):
        if not 1 <= self.ngram_min <= self.ngram_max <= 3:
            raise ValueError("n-gram range must satisfy 1 <= min <= max <= 3")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1")

    def to_dict(self) -> dict:
        return {"ngram_min": self.ngram_min, "ngram_max": self.ngram_max,
                "top_k": self.top_k, "select": self.select, "normalize": self.normalize}

    @classmethod
    def from_dict(cls, d: dict) -> FeatureConfig:
        return cls(**d)


def fit_features(docs: Sequence[Sequence[str]], labels: Sequence[Label],
                 cfg: FeatureConfig) -> Vectorizer:
    """Fit the n-gram vocabulary, then keep the Fisher-selected features."""
    vec = fit_vectorizer(docs, cfg.ngram_min, cfg.ngram_max, cfg.normalize)
    if not cfg.select or len(set(labels)) < 2 or len(vec.vocabulary) == 0:
        return vec
    scores = fisher_scores(vec.transform_many(docs), labels)
    chosen = select_top_k(scores, cfg.top_k) if cfg.top_k else default_selection(scores)
    return vec.with_selection(chosen) if chosen else vec


def train_text_model(messages: Sequence[str], labels: Sequence[Label], spec: ClassifierSpec,
                     task: Task | None = None, features: FeatureConfig | None = None,
                     prep: PreprocessConfig | None = None) -> TrainedModel:
    features = features or FeatureConfig()
    prep = prep or PreprocessConfig()
    if task is None:
        task = Task.BINARY if labels and labels[0] in Task.BINARY.labels else Task.MULTICLASS
    docs = [preprocess(m, prep) for m in messages]
    vec = fit_features(docs, labels, features)
    X = vec.transform_many(docs)
    m = fit(spec, X, labels, task.labels, n_features=vec.n_features)
    return TrainedModel(m.spec, m.labels, m.n_features, m.params, m.prior, task, vec, prep)


def train_on_dataset(d: Dataset, spec: ClassifierSpec, features: FeatureConfig | None = None,
                     prep: PreprocessConfig | None = None) -> TrainedModel:
    if d.task is None or any(c.label is None for c in d.commits):
        raise DataError("training needs a fully labeled dataset with a task")
    return train_text_model(d.messages, d.labels, spec, d.task, features, prep)


def vectorize_messages(m: TrainedModel, messages: Sequence[str]):
    if m.vectorizer is None:
        raise DataError("model carries no vectorizer; it cannot classify raw text")
    prep = m.preprocess or PreprocessConfig()
    return m.vectorizer.transform_many([preprocess(t, prep) for t in messages])


def predict_messages(m: TrainedModel, messages: Sequence[str]) -> list[Label]:
    return m.predict_many(vectorize_messages(m, messages))


def classify_message(m: TrainedModel, message: str,
                     matcher: PatternMatcher | None = None) -> dict:
    """The record emitted per message by the CLI and the HTTP service."""
    matcher = matcher or default_matcher()
    X = vectorize_messages(m, [message])
    label = m.labels[int(m.predict_indices(X)[0])]
    scores = m.score_matrix(X)[0]
    return {
        "label": label.value,
        "scores": {lab.value: float(s) for lab, s in zip(m.labels, scores)},
        "matched_patterns": [p.text for p in matcher.match_sar(message)],
        "model_id": model_id(m),
    }


def model_id(m: TrainedModel) -> str:
    """Content checksum identifying ``m`` in responses."""
    return m.checksum
