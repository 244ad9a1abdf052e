"""Classifier specs, trained models, prediction, and the JSON model file."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, softmax

from ..corpus import Label, Task
from ..errors import DataError, ModelFileError
from ..features import SparseVector, Vectorizer, to_csr
from ..preprocess import PreprocessConfig
from .linear import AveragedPerceptron, SoftmaxRegression
from .trees import GradientBoosting, RandomForest

log = logging.getLogger(__name__)

FORMAT_VERSION = "1"
KINDS = ("lr", "rf", "gbm", "perceptron", "random")

DEFAULTS: dict[str, dict[str, Any]] = {
    "lr": {"l2": 1e-4, "learning_rate": 0.1, "epochs": 500, "tol": 1e-6, "accelerated": True},
    "rf": {"n_trees": 100, "max_features": "sqrt", "bootstrap": True, "min_leaf": 1,
           "max_depth": None},
    "gbm": {"n_rounds": 100, "max_depth": 3, "learning_rate": 0.1},
    "perceptron": {"epochs": 10},
    "random": {},
}


def _check_params(kind: str, p: dict) -> None:
    def positive_int(name):
        if not isinstance(p[name], (int, np.integer)) or isinstance(p[name], bool) or p[name] < 1:
            raise ValueError(f"{kind}: {name} must be a positive integer, got {p[name]!r}")

    def nonneg(name):
        if not isinstance(p[name], (int, float)) or p[name] < 0:
            raise ValueError(f"{kind}: {name} must be >= 0, got {p[name]!r}")

    if kind == "lr":
        nonneg("l2")
        nonneg("tol")
        positive_int("epochs")
        if not isinstance(p["accelerated"], bool):
            raise ValueError("lr: accelerated must be a boolean")
        if not p["learning_rate"] > 0:
            raise ValueError("lr: learning_rate must be > 0")
    elif kind == "rf":
        positive_int("n_trees")
        positive_int("min_leaf")
        if p["max_depth"] is not None:
            positive_int("max_depth")
        mf = p["max_features"]
        if mf not in ("sqrt", "all", None) and not (isinstance(mf, int) and mf >= 1):
            raise ValueError(f"rf: max_features must be 'sqrt', 'all' or a positive int, got {mf!r}")
    elif kind == "gbm":
        positive_int("n_rounds")
        positive_int("max_depth")
        if not 0 < p["learning_rate"] <= 1:
            raise ValueError("gbm: learning_rate must be in (0, 1]")
    elif kind == "perceptron":
        positive_int("epochs")


@dataclass(frozen=True)
class ClassifierSpec:
    """Learner kind, hyperparameter overrides and seed.

    ``one_vs_all=None`` wraps gbm and perceptron in one-vs-all only for more
    than two labels; True forces the wrapper (meaningful for those two kinds).
    """

    kind: str = "lr"
    params: dict = field(default_factory=dict)
    seed: int = 0
    one_vs_all: bool | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"{self.kind}: unknown hyperparameters {sorted(unknown)}")
        _check_params(self.kind, self.resolved())

    def resolved(self) -> dict:
        return {**DEFAULTS[self.kind], **self.params}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.resolved(), "seed": self.seed,
                "one_vs_all": self.one_vs_all}

    @classmethod
    def from_dict(cls, d: dict) -> ClassifierSpec:
        return cls(d["kind"], dict(d.get("params", {})), int(d.get("seed", 0)),
                   d.get("one_vs_all"))


def _softmax(p: dict) -> SoftmaxRegression:
    return SoftmaxRegression(p["l2"], p["learning_rate"], p["epochs"], p["tol"], p["accelerated"])


def _uses_ova(spec: ClassifierSpec, n_labels: int) -> bool:
    if spec.kind not in ("gbm", "perceptron"):
        return False
    return n_labels > 2 if spec.one_vs_all is None else bool(spec.one_vs_all)


def _make_binary(spec: ClassifierSpec):
    p = spec.resolved()
    if spec.kind == "gbm":
        return GradientBoosting(p["n_rounds"], p["max_depth"], p["learning_rate"])
    # every sub-model shares the shuffle seed so label-flipped problems stay mirror images
    return AveragedPerceptron(p["epochs"], spec.seed)


def _random_draws(seed: int, X: sp.csr_matrix, n_labels: int) -> np.ndarray:
    """One pseudorandom label per row, a pure function of (seed, row content)."""
    X = sp.csr_matrix(X)
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        lo, hi = X.indptr[r], X.indptr[r + 1]
        h = hashlib.blake2b(digest_size=8, key=str(seed).encode())
        h.update(np.ascontiguousarray(X.indices[lo:hi], dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(X.data[lo:hi], dtype=np.float64).tobytes())
        out[r] = int.from_bytes(h.digest(), "little") % n_labels
    return out


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: ClassifierSpec
    labels: tuple[Label, ...]
    n_features: int
    params: Any  # fitted estimator or list of one-vs-all estimators; None for random
    prior: tuple[float, ...]
    task: Task | None = None
    vectorizer: Vectorizer | None = None
    preprocess: PreprocessConfig | None = None

    @property
    def one_vs_all(self) -> bool:
        return isinstance(self.params, list)

    def _matrix(self, X) -> sp.csr_matrix:
        if isinstance(X, SparseVector):
            X = [X]
        if not sp.issparse(X):
            bad = [v for v in X if v.indices and v.indices[-1] >= self.n_features]
            if bad:
                log.warning("ignoring feature indices beyond model dimensionality %d",
                            self.n_features)
            return to_csr(X, self.n_features)
        X = sp.csr_matrix(X, dtype=np.float64)
        if X.shape[1] != self.n_features:
            if X.shape[1] > self.n_features:
                log.warning("ignoring feature columns beyond %d", self.n_features)
                return X[:, : self.n_features]
            X = sp.csr_matrix((X.data, X.indices, X.indptr), shape=(X.shape[0], self.n_features))
        return X

    def score_matrix(self, X) -> np.ndarray:
        """Rows of label probabilities, columns in ``labels`` order."""
        X = self._matrix(X)
        k = len(self.labels)
        kind = self.spec.kind
        if kind == "random":
            return np.full((X.shape[0], k), 1.0 / k)
        if kind == "lr":
            return self.params.predict_proba(X)
        if kind == "rf":
            return self.params.predict_proba(X)
        if self.one_vs_all:
            margins = np.column_stack([m.decision_function(X) for m in self.params])
            if kind == "gbm":
                p = expit(margins)
                return p / p.sum(axis=1, keepdims=True)
            return softmax(margins, axis=1)
        # native binary: the estimator scores labels[0] against labels[1]
        f = self.params.decision_function(X)
        p0 = expit(f)
        return np.column_stack([p0, expit(-f)])

    def predict_indices(self, X) -> np.ndarray:
        X = self._matrix(X)
        if self.spec.kind == "random":
            return _random_draws(self.spec.seed, X, len(self.labels))
        # np.argmax returns the first maximum, i.e. declaration order on ties
        return np.argmax(self.score_matrix(X), axis=1)

    def predict_many(self, X) -> list[Label]:
        return [self.labels[i] for i in self.predict_indices(X)]

    def feature_importances(self) -> np.ndarray:
        """(n_labels, n_features) ranking weights; rows equal for label-agnostic rankings."""
        k = len(self.labels)
        kind = self.spec.kind
        if kind == "random":
            return np.zeros((k, self.n_features))
        if kind == "lr":
            return np.abs(self.params.W)
        if kind == "rf":
            return np.tile(self.params.importances(), (k, 1))
        if self.one_vs_all:
            if kind == "gbm":
                return np.vstack([m.importances() for m in self.params])
            return np.vstack([np.abs(m.w) for m in self.params])
        imp = self.params.importances() if kind == "gbm" else np.abs(self.params.w)
        return np.tile(imp, (k, 1))

    def top_features(self, n: int = 20) -> dict[str, list[tuple[str, float]]]:
        names = self.vectorizer.feature_names() if self.vectorizer else \
            [str(i) for i in range(self.n_features)]
        imp = self.feature_importances()
        out = {}
        for lab, row in zip(self.labels, imp):
            order = np.argsort(-row, kind="stable")[:n]
            out[lab.value] = [(names[j], float(row[j])) for j in order if row[j] > 0]
        return out

    # serialization

    def _params_dict(self):
        if self.params is None:
            return None
        if self.one_vs_all:
            return [m.to_dict() for m in self.params]
        return self.params.to_dict()

    def payload(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "task": None if self.task is None else self.task.value,
            "labels": [lab.value for lab in self.labels],
            "n_features": self.n_features,
            "prior": list(self.prior),
            "one_vs_all": self.one_vs_all,
            "params": self._params_dict(),
            "vectorizer": None if self.vectorizer is None else self.vectorizer.to_dict(),
            "preprocess": None if self.preprocess is None else self.preprocess.to_dict(),
        }

    @cached_property
    def checksum(self) -> str:
        return _checksum(self.payload())


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _checksum(payload: dict) -> str:
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def fit(spec: ClassifierSpec, X, y: Sequence[Label], labels: Sequence[Label],
        n_features: int | None = None) -> TrainedModel:
    """Train ``spec`` on sparse vectors ``X`` with gold labels ``y``."""
    labels = tuple(labels)
    if sp.issparse(X):
        X = sp.csr_matrix(X, dtype=np.float64)
        n_features = X.shape[1] if n_features is None else n_features
        if X.shape[1] != n_features:
            raise DataError(f"dimension mismatch: X has {X.shape[1]} columns, expected {n_features}")
    else:
        X = list(X)
        top = 1 + max((v.indices[-1] for v in X if v.indices), default=-1)
        if n_features is None:
            n_features = top
        elif top > n_features:
            raise DataError(f"dimension mismatch: feature index {top - 1} >= {n_features}")
        X = to_csr(X, n_features)
    n = X.shape[0]
    if n == 0:
        raise DataError("empty training set")
    if n != len(y):
        raise DataError(f"dimension mismatch: {n} vectors but {len(y)} labels")
    if len(set(labels)) != len(labels) or len(labels) < 2:
        raise DataError("label set must hold at least two distinct labels")
    index = {lab: i for i, lab in enumerate(labels)}
    try:
        yi = np.array([index[lab] for lab in y], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"label {exc.args[0]} not in label set") from None
    counts = np.bincount(yi, minlength=len(labels))
    prior = tuple((counts / n).tolist())
    if spec.kind != "random" and np.count_nonzero(counts) < 2:
        raise DataError("training data must contain at least two labels")
    if n < 2 and spec.kind != "random":
        raise DataError("need at least two training vectors")

    p = spec.resolved()
    if spec.kind == "random":
        params = None
    elif spec.kind == "lr":
        params = _softmax(p).fit(X, yi, len(labels))
    elif spec.kind == "rf":
        params = RandomForest(p["n_trees"], p["max_features"], p["bootstrap"], p["min_leaf"],
                              p["max_depth"], spec.seed).fit(X, yi, len(labels))
    elif _uses_ova(spec, len(labels)):
        params = [_make_binary(spec).fit(X, np.where(yi == c, 1.0, -1.0))
                  for c in range(len(labels))]
    else:
        if len(labels) != 2:
            raise DataError(f"{spec.kind} without one-vs-all needs exactly two labels")
        params = _make_binary(spec).fit(X, np.where(yi == 0, 1.0, -1.0))
    return TrainedModel(spec, labels, n_features, params, prior)


def predict_scores(m: TrainedModel, x: SparseVector) -> dict[Label, float]:
    row = m.score_matrix(x)[0]
    return {lab: float(s) for lab, s in zip(m.labels, row)}


def predict(m: TrainedModel, x: SparseVector) -> Label:
    return m.labels[int(m.predict_indices(x)[0])]


def _estimator_from(kind: str, spec: ClassifierSpec, d: dict):
    p = spec.resolved()
    if kind == "lr":
        return _softmax(p).load(d)
    if kind == "rf":
        return RandomForest(p["n_trees"], p["max_features"], p["bootstrap"], p["min_leaf"],
                            p["max_depth"], spec.seed).load(d)
    if kind == "gbm":
        return GradientBoosting(p["n_rounds"], p["max_depth"], p["learning_rate"]).load(d)
    return AveragedPerceptron(p["epochs"], spec.seed).load(d)


def model_to_json(m: TrainedModel) -> str:
    payload = m.payload()
    return _canonical({"checksum": _checksum(payload), "model": payload}) + "\n"


def model_from_json(text: str) -> TrainedModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"corrupted model file: checksum cannot be verified ({exc.msg})") from None
    if not isinstance(doc, dict) or "model" not in doc or "checksum" not in doc:
        raise ModelFileError("not a model file")
    payload = doc["model"]
    version = payload.get("format_version") if isinstance(payload, dict) else None
    if version != FORMAT_VERSION:
        raise ModelFileError(f"unsupported model format_version {version!r} "
                             f"(this build reads {FORMAT_VERSION!r})")
    if _checksum(payload) != doc["checksum"]:
        raise ModelFileError("corrupted model file: checksum mismatch")
    try:
        spec = ClassifierSpec.from_dict(payload["spec"])
        raw = payload["params"]
        if raw is None:
            params = None
        elif payload["one_vs_all"]:
            params = [_estimator_from(spec.kind, spec, d) for d in raw]
        else:
            params = _estimator_from(spec.kind, spec, raw)
        return TrainedModel(
            spec,
            tuple(Label(lab) for lab in payload["labels"]),
            int(payload["n_features"]),
            params,
            tuple(payload["prior"]),
            None if payload["task"] is None else Task(payload["task"]),
            None if payload["vectorizer"] is None else Vectorizer.from_dict(payload["vectorizer"]),
            None if payload["preprocess"] is None else PreprocessConfig.from_dict(payload["preprocess"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from None


def save_model(m: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(m), encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ModelFileError(f"{path}: no such model file") from None
    except UnicodeDecodeError:
        raise ModelFileError(f"{path}: corrupted model file (not UTF-8)") from None
    return model_from_json(text)
