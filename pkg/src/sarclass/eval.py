"""Metrics, cross-validation, baseline comparison, learning curves and rank statistics."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.stats import norm

from .baselines import PatternMatcher, default_matcher
from .classifiers import ClassifierSpec
from .corpus import Dataset, Label, Task, stratified_kfold
from .errors import DataError
from .pipeline import FeatureConfig, predict_messages, train_on_dataset
from .preprocess import PreprocessConfig

BINARY = "binary"
MACRO = "macro"


@dataclass(frozen=True)
class ConfusionCounts:
    """``counts[t][p]`` over ``labels``; ``abstained[t]`` counts rows with no prediction."""

    labels: tuple[Label, ...]
    counts: tuple[tuple[int, ...], ...]
    abstained: tuple[int, ...]
    positive: Label | None = None

    @property
    def total(self) -> int:
        return sum(map(sum, self.counts)) + sum(self.abstained)

    def _pos(self) -> int:
        if self.positive is None:
            raise ValueError("binary counts need a positive label")
        return self.labels.index(self.positive)

    @property
    def tp(self) -> int:
        i = self._pos()
        return self.counts[i][i]

    @property
    def fp(self) -> int:
        i = self._pos()
        return sum(row[i] for t, row in enumerate(self.counts) if t != i)

    @property
    def fn(self) -> int:
        i = self._pos()
        return sum(self.counts[i]) - self.counts[i][i] + self.abstained[i]

    @property
    def tn(self) -> int:
        return self.total - self.tp - self.fp - self.fn

    def per_class(self) -> dict[Label, tuple[float, float]]:
        """Precision and recall of each label treated as the positive class."""
        out = {}
        for i, lab in enumerate(self.labels):
            hit = self.counts[i][i]
            predicted = sum(row[i] for row in self.counts)
            actual = sum(self.counts[i]) + self.abstained[i]
            out[lab] = (_ratio(hit, predicted), _ratio(hit, actual))
        return out

    def to_dict(self) -> dict:
        return {"labels": [lab.value for lab in self.labels],
                "counts": [list(r) for r in self.counts],
                "abstained": list(self.abstained),
                "positive": None if self.positive is None else self.positive.value}


def _ratio(a: float, b: float) -> float:
    return a / b if b else 0.0


def confusion_matrix(y_true: Sequence[Label], y_pred: Sequence[Label | None],
                     labels: Sequence[Label] | None = None,
                     positive: Label | None = None) -> ConfusionCounts:
    """Count (truth, prediction) pairs. A ``None`` prediction is an abstention."""
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} truths vs {len(y_pred)} predictions")
    if not y_true:
        raise ValueError("need at least one instance")
    if labels is None:
        task = Task.BINARY if y_true[0] in Task.BINARY.labels else Task.MULTICLASS
        labels = task.labels
        positive = positive or task.positive
    labels = tuple(labels)
    pos = {lab: i for i, lab in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    abstained = [0] * len(labels)
    for t, p in zip(y_true, y_pred):
        if t not in pos:
            raise ValueError(f"foreign label {t!r} in truth")
        if p is None:
            abstained[pos[t]] += 1
        elif p not in pos:
            raise ValueError(f"foreign label {p!r} in predictions")
        else:
            counts[pos[t]][pos[p]] += 1
    return ConfusionCounts(labels, tuple(map(tuple, counts)), tuple(abstained), positive)


def f_measure(precision: float, recall: float) -> float:
    s = precision + recall
    return 2 * precision * recall / s if s > 0 else 0.0


@dataclass(frozen=True)
class MetricSet:
    precision: float
    recall: float
    accuracy: float
    f_measure: float
    averaging: str = BINARY

    @classmethod
    def from_pr(cls, precision: float, recall: float, accuracy: float = float("nan"),
                averaging: str = BINARY) -> MetricSet:
        return cls(precision, recall, accuracy, f_measure(precision, recall), averaging)

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "accuracy": self.accuracy, "f_measure": self.f_measure,
                "averaging": self.averaging}


def metrics(c: ConfusionCounts, averaging: str = BINARY) -> MetricSet:
    if c.total < 1:
        raise ValueError("empty confusion matrix")
    acc = sum(c.counts[i][i] for i in range(len(c.labels))) / c.total
    if averaging == BINARY:
        p, r = _ratio(c.tp, c.tp + c.fp), _ratio(c.tp, c.tp + c.fn)
    elif averaging == MACRO:
        pr = list(c.per_class().values())
        p = sum(x for x, _ in pr) / len(pr)
        r = sum(y for _, y in pr) / len(pr)
    else:
        raise ValueError(f"averaging must be {BINARY!r} or {MACRO!r}")
    return MetricSet(p, r, acc, f_measure(p, r), averaging)


def averaging_for(task: Task) -> str:
    return BINARY if task is Task.BINARY else MACRO


def mean_metrics(ms: Sequence[MetricSet]) -> MetricSet:
    n = len(ms)
    return MetricSet(sum(m.precision for m in ms) / n, sum(m.recall for m in ms) / n,
                     sum(m.accuracy for m in ms) / n, sum(m.f_measure for m in ms) / n,
                     ms[0].averaging)


def improvement_factor(f_ours: float, f_baseline: float) -> float:
    if not f_baseline > 0:
        raise ValueError("baseline score must be > 0")
    return f_ours / f_baseline


# cross-validation


@dataclass(frozen=True)
class CVReport:
    folds: tuple[MetricSet, ...]
    aggregate: MetricSet
    spec: ClassifierSpec
    k: int
    seed: int
    confusion: ConfusionCounts  # pooled over folds
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config, "spec": self.spec.to_dict(), "k": self.k,
                "seed": self.seed, "aggregate": self.aggregate.to_dict(),
                "folds": [m.to_dict() for m in self.folds],
                "confusion": self.confusion.to_dict()}

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_text(self) -> str:
        rows = [(f"fold {i + 1}", m) for i, m in enumerate(self.folds)]
        rows.append(("mean", self.aggregate))
        head = f"{self.spec.kind} k={self.k} seed={self.seed} ({self.aggregate.averaging})"
        return head + "\n" + _metric_table(rows)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _metric_table(rows: Sequence[tuple[str, MetricSet]]) -> str:
    w = max(12, *(len(name) for name, _ in rows))
    lines = [f"{'':<{w}}  {'precision':>9}  {'recall':>9}  {'f_measure':>9}  {'accuracy':>9}"]
    for name, m in rows:
        lines.append(f"{name:<{w}}  {m.precision:>9.4f}  {m.recall:>9.4f}  "
                     f"{m.f_measure:>9.4f}  {m.accuracy:>9.4f}")
    return "\n".join(lines) + "\n"


def _split(d: Dataset, fold: Sequence[int]) -> tuple[Dataset, Dataset]:
    held = set(fold)
    return d.subset([i for i in range(len(d)) if i not in held]), d.subset(sorted(fold))


def _require_labeled(d: Dataset) -> Task:
    if d.task is None or any(lab is None for lab in d.labels):
        raise DataError("evaluation needs a fully labeled dataset with a task")
    return d.task


def _fold_predictions(args) -> list[Label]:
    train, test, spec, features, prep = args
    return predict_messages(train_on_dataset(train, spec, features, prep), test.messages)


def _run_folds(d, folds, spec, features, prep, workers) -> list[list[Label]]:
    jobs = [(*_split(d, f), spec, features, prep) for f in folds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_fold_predictions, jobs))
    return [_fold_predictions(j) for j in jobs]


def _fold_report(d: Dataset, folds, preds: Sequence[Sequence[Label | None]]):
    task = d.task
    avg = averaging_for(task)
    per, truth, pooled = [], [], []
    for f, p in zip(folds, preds):
        t = [d[i].label for i in sorted(f)]
        per.append(metrics(confusion_matrix(t, p, task.labels, task.positive), avg))
        truth += t
        pooled += list(p)
    return per, confusion_matrix(truth, pooled, task.labels, task.positive)


def cross_validate(d: Dataset, spec: ClassifierSpec, k: int = 10, seed: int = 0,
                   features: FeatureConfig | None = None, prep: PreprocessConfig | None = None,
                   config: dict | None = None, workers: int = 1) -> CVReport:
    """Stratified k-fold CV; vectorizer, selection and classifier are refit inside each fold."""
    _require_labeled(d)
    folds = stratified_kfold(d, k, seed)
    preds = _run_folds(d, folds, spec, features, prep, workers)
    per, pooled = _fold_report(d, folds, preds)
    return CVReport(tuple(per), mean_metrics(per), spec, k, seed, pooled, dict(config or {}))


# baselines on the same folds


def pattern_predictions(d: Dataset, matcher: PatternMatcher | None = None) -> list[Label | None]:
    """Keyword baseline labels; multiclass messages with no or several categories abstain."""
    matcher = matcher or default_matcher()
    if d.task is Task.BINARY:
        return [Label.SAR if matcher.match_sar(m) else Label.NON_SAR for m in d.messages]
    return [matcher.match_category(m).label for m in d.messages]


def analytical_random(d: Dataset) -> MetricSet:
    """Coin-flip baseline: precision is the class share, recall is one half."""
    task = _require_labeled(d)
    counts = d.class_counts()
    n = len(d)
    if task is Task.BINARY:
        p = counts[task.positive] / n
        avg = BINARY
    else:
        p = sum(counts.values()) / n / len(counts)
        avg = MACRO
    return MetricSet.from_pr(p, 0.5, 1 / len(task.labels), avg)


@dataclass(frozen=True)
class CompareReport:
    task: Task
    k: int
    seed: int
    model: CVReport
    pattern: MetricSet
    random: MetricSet
    random_analytical: MetricSet
    config: dict = field(default_factory=dict)

    def improvements(self) -> dict[str, dict[str, float | None]]:
        ours = self.model.aggregate
        out = {}
        for name, base in (("pattern", self.pattern), ("random", self.random),
                           ("random_analytical", self.random_analytical)):
            out[name] = {k: (improvement_factor(getattr(ours, k), getattr(base, k))
                             if getattr(base, k) > 0 else None)
                         for k in ("precision", "recall", "f_measure")}
        return out

    def to_dict(self) -> dict:
        return {"config": self.config, "task": self.task.value, "k": self.k, "seed": self.seed,
                "model": self.model.to_dict(), "pattern": self.pattern.to_dict(),
                "random": self.random.to_dict(),
                "random_analytical": self.random_analytical.to_dict(),
                "improvement": self.improvements()}

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_text(self) -> str:
        rows = [(f"model ({self.model.spec.kind})", self.model.aggregate),
                ("pattern", self.pattern), ("random", self.random),
                ("random (analytical)", self.random_analytical)]
        out = [f"{self.task.value} k={self.k} seed={self.seed}", _metric_table(rows).rstrip()]
        out.append("")
        out.append(f"{'improvement':<20}  {'precision':>9}  {'recall':>9}  {'f_measure':>9}")
        for name, ratios in self.improvements().items():
            cells = "  ".join(f"{'n/a' if v is None else f'{v:.2f}x':>9}"
                              for v in ratios.values())
            out.append(f"{'vs ' + name:<20}  {cells}")
        return "\n".join(out) + "\n"


def compare(d: Dataset, spec: ClassifierSpec, k: int = 10, seed: int = 0,
            features: FeatureConfig | None = None, prep: PreprocessConfig | None = None,
            matcher: PatternMatcher | None = None, config: dict | None = None,
            workers: int = 1) -> CompareReport:
    """Model, keyword baseline and seeded random baseline scored on identical folds."""
    task = _require_labeled(d)
    folds = stratified_kfold(d, k, seed)
    model = cross_validate(d, spec, k, seed, features, prep, config, workers)
    guesses = pattern_predictions(d, matcher)
    pattern_per, _ = _fold_report(d, folds, [[guesses[i] for i in sorted(f)] for f in folds])
    rnd_spec = ClassifierSpec("random", {}, spec.seed)
    rnd_per, _ = _fold_report(d, folds, _run_folds(d, folds, rnd_spec, features, prep, 1))
    return CompareReport(task, k, seed, model, mean_metrics(pattern_per), mean_metrics(rnd_per),
                         analytical_random(d), dict(config or {}))


# learning curve


@dataclass(frozen=True)
class LearningCurve:
    batch: int
    points: tuple[tuple[int, MetricSet], ...]
    per_fold: tuple[tuple[float, ...], ...] = ()  # F per fold at each size
    config: dict = field(default_factory=dict)

    @property
    def sizes(self) -> list[int]:
        return [s for s, _ in self.points]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["size", "precision", "recall", "accuracy", "f"])
        for size, m in self.points:
            w.writerow([size, repr(m.precision), repr(m.recall), repr(m.accuracy),
                        repr(m.f_measure)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"config": self.config, "batch": self.batch,
                "points": [{"size": s, **m.to_dict()} for s, m in self.points],
                "per_fold_f": [list(r) for r in self.per_fold]}


def stratified_order(labels: Sequence[Hashable], rng: np.random.Generator) -> list[int]:
    """Ordering whose every prefix keeps class proportions within one instance."""
    groups: dict[Hashable, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    keyed = []
    for rank, members in enumerate(groups.values()):
        perm = rng.permutation(len(members))
        n = len(members)
        keyed += [((j + 0.5) / n, rank, members[p]) for j, p in enumerate(perm)]
    return [i for *_, i in sorted(keyed)]


def learning_curve(d: Dataset, spec: ClassifierSpec, batch: int = 100, k: int = 10,
                   seed: int = 0, features: FeatureConfig | None = None,
                   prep: PreprocessConfig | None = None, config: dict | None = None
                   ) -> LearningCurve:
    """Mean held-out metrics when training on stratified prefixes of batch, 2*batch, ... rows."""
    _require_labeled(d)
    if batch < 1:
        raise ValueError("batch must be >= 1")
    folds = stratified_kfold(d, k, seed)
    splits = [_split(d, f) for f in folds]
    smallest = min(len(tr) for tr, _ in splits)
    if batch > smallest:
        raise DataError(f"batch {batch} exceeds the training split size {smallest}")
    sizes = [batch * i for i in range(1, smallest // batch + 1)]
    avg = averaging_for(d.task)
    grid: list[list[MetricSet]] = [[] for _ in sizes]
    for f_i, (train, test) in enumerate(splits):
        order = stratified_order(train.labels, np.random.default_rng([seed, f_i]))
        for s_i, size in enumerate(sizes):
            # prefixes are re-sorted so the full prefix trains exactly like cross_validate
            part = train.subset(sorted(order[:size]))
            if len(set(part.labels)) < 2:
                raise DataError(f"training prefix of {size} holds a single class")
            pred = predict_messages(train_on_dataset(part, spec, features, prep), test.messages)
            c = confusion_matrix(test.labels, pred, d.task.labels, d.task.positive)
            grid[s_i].append(metrics(c, avg))
    points = tuple((s, mean_metrics(ms)) for s, ms in zip(sizes, grid))
    per_fold = tuple(tuple(m.f_measure for m in ms) for ms in grid)
    return LearningCurve(batch, points, per_fold, dict(config or {}))


# statistics


@dataclass(frozen=True)
class MannWhitney:
    u: float
    p: float
    method: str  # "exact" | "normal"


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_v = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def mann_whitney_u(xs: Sequence[float], ys: Sequence[float]) -> MannWhitney:
    """U statistic of ``xs`` with a two-sided p-value.

    Pools of at most 12 values are enumerated exactly over every assignment
    of the pooled midranks; larger pools use the tie- and continuity-corrected
    normal approximation.
    """
    n1, n2 = len(xs), len(ys)
    if n1 < 1 or n2 < 1:
        raise ValueError("both samples must be non-empty")
    pooled = np.asarray(list(xs) + list(ys), dtype=np.float64)
    ranks = _midranks(pooled)
    offset = n1 * (n1 + 1) / 2
    u = float(ranks[:n1].sum() - offset)
    n = n1 + n2
    mu = n1 * n2 / 2
    if n <= 12:
        dist = [float(ranks[list(c)].sum() - offset)
                for c in itertools.combinations(range(n), n1)]
        eps = 1e-9
        lo = sum(v <= u + eps for v in dist) / len(dist)
        hi = sum(v >= u - eps for v in dist) / len(dist)
        return MannWhitney(u, min(1.0, 2 * min(lo, hi)), "exact")
    ties = Counter(pooled.tolist()).values()
    tie_term = sum(t ** 3 - t for t in ties) / (n * (n - 1))
    var = n1 * n2 / 12 * ((n + 1) - tie_term)
    if var <= 0:
        return MannWhitney(u, 1.0, "normal")
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return MannWhitney(u, float(min(1.0, 2 * norm.sf(z))), "normal")


def cohens_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("need at least one rating pair")
    n = len(a)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    ca, cb = Counter(a), Counter(b)
    p_e = sum(ca[k] * cb.get(k, 0) for k in ca) / (n * n)
    if p_e == 1:
        return 1.0
    return (p_o - p_e) / (1 - p_e)


def feature_report(model, n: int = 20) -> dict:
    """Top-ranked n-grams per label for a trained text model."""
    return {"kind": model.spec.kind, "top_features": {
        lab: [{"feature": f, "weight": w} for f, w in feats]
        for lab, feats in model.top_features(n).items()}}
