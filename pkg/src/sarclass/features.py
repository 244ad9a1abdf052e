"""N-gram TF-IDF vectorization and Fisher-score feature selection."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
import scipy.sparse as sp

FISHER_EPS = 1e-12
DEFAULT_TOP_K_CAP = 5000


@dataclass(frozen=True)
class SparseVector:
    """Feature weights with strictly increasing indices and no stored zeros."""

    indices: tuple[int, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        val = tuple(float(v) for v in self.values)
        if len(idx) != len(val):
            raise ValueError("indices and values differ in length")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if idx and idx[0] < 0:
            raise ValueError("negative feature index")
        if any(v == 0.0 for v in val):
            raise ValueError("zero weights must not be stored")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_mapping(cls, weights: dict[int, float]) -> SparseVector:
        items = sorted((i, w) for i, w in weights.items() if w != 0.0)
        return cls(tuple(i for i, _ in items), tuple(w for _, w in items))

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.indices, self.values))

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))

    def __len__(self) -> int:
        return len(self.indices)


def to_csr(vectors: Sequence[SparseVector], n_features: int) -> sp.csr_matrix:
    """Stack vectors into a CSR matrix, dropping indices >= ``n_features``."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for v in vectors:
        for i, w in zip(v.indices, v.values):
            if i < n_features:
                indices.append(i)
                data.append(w)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(vectors), n_features),
    )


def from_csr(X: sp.csr_matrix) -> list[SparseVector]:
    X = sp.csr_matrix(X)
    X.sort_indices()
    out = []
    for r in range(X.shape[0]):
        lo, hi = X.indptr[r], X.indptr[r + 1]
        keep = X.data[lo:hi] != 0
        out.append(SparseVector(tuple(X.indices[lo:hi][keep].tolist()),
                                tuple(X.data[lo:hi][keep].tolist())))
    return out


def extract_ngrams(tokens: Sequence[str], nmin: int = 1, nmax: int = 2) -> Counter:
    if not 1 <= nmin <= nmax:
        raise ValueError("need 1 <= nmin <= nmax")
    grams: Counter = Counter()
    for n in range(nmin, nmax + 1):
        for i in range(len(tokens) - n + 1):
            grams[" ".join(tokens[i:i + n])] += 1
    return grams


@dataclass(frozen=True)
class Vectorizer:
    ngram_min: int
    ngram_max: int
    vocabulary: dict[str, int]
    idf: tuple[float, ...]
    doc_count: int
    selected: tuple[int, ...] | None = None
    normalize: bool = True
    _remap: dict[int, int] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.selected is not None:
            sel = tuple(int(i) for i in self.selected)
            if any(b <= a for a, b in zip(sel, sel[1:])):
                raise ValueError("selected indices must be strictly increasing")
            if sel and (sel[0] < 0 or sel[-1] >= len(self.vocabulary)):
                raise ValueError("selected index out of range")
            object.__setattr__(self, "selected", sel)
            object.__setattr__(self, "_remap", {f: j for j, f in enumerate(sel)})

    @property
    def n_features(self) -> int:
        """Dimensionality of transformed vectors (selected subset if any)."""
        return len(self.vocabulary) if self.selected is None else len(self.selected)

    def feature_names(self) -> list[str]:
        names = [None] * len(self.vocabulary)
        for gram, i in self.vocabulary.items():
            names[i] = gram
        if self.selected is None:
            return names
        return [names[i] for i in self.selected]

    def with_selection(self, selected: Sequence[int] | None) -> Vectorizer:
        return Vectorizer(self.ngram_min, self.ngram_max, self.vocabulary, self.idf,
                          self.doc_count, None if selected is None else tuple(selected),
                          self.normalize)

    def transform(self, tokens: Sequence[str]) -> SparseVector:
        return transform(self, tokens)

    def transform_many(self, docs: Sequence[Sequence[str]]) -> sp.csr_matrix:
        return to_csr([transform(self, t) for t in docs], self.n_features)

    def to_dict(self) -> dict:
        return {
            "ngram_min": self.ngram_min,
            "ngram_max": self.ngram_max,
            "vocabulary": [g for g, _ in sorted(self.vocabulary.items(), key=lambda kv: kv[1])],
            "idf": list(self.idf),
            "doc_count": self.doc_count,
            "selected": None if self.selected is None else list(self.selected),
            "normalize": self.normalize,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Vectorizer:
        vocab = {g: i for i, g in enumerate(d["vocabulary"])}
        return cls(int(d["ngram_min"]), int(d["ngram_max"]), vocab,
                   tuple(float(x) for x in d["idf"]), int(d["doc_count"]),
                   None if d["selected"] is None else tuple(d["selected"]),
                   bool(d["normalize"]))


def fit_vectorizer(corpus: Sequence[Sequence[str]], nmin: int = 1, nmax: int = 2,
                   normalize: bool = True) -> Vectorizer:
    """Vocabulary in first-seen order with smoothed idf ``ln((1+N)/(1+df)) + 1``."""
    if len(corpus) == 0:
        raise ValueError("cannot fit a vectorizer on an empty corpus")
    vocab: dict[str, int] = {}
    df: list[int] = []
    for tokens in corpus:
        for gram in extract_ngrams(tokens, nmin, nmax):
            j = vocab.setdefault(gram, len(vocab))
            if j == len(df):
                df.append(0)
            df[j] += 1
    n = len(corpus)
    idf = tuple(math.log((1 + n) / (1 + d)) + 1.0 for d in df)
    return Vectorizer(nmin, nmax, vocab, idf, n, None, normalize)


def transform(v: Vectorizer, tokens: Sequence[str]) -> SparseVector:
    """Raw count times idf, restricted to the selection, then L2-normalized.

    With a selection set, output indices are positions within ``v.selected``.
    """
    weights: dict[int, float] = {}
    for gram, count in extract_ngrams(tokens, v.ngram_min, v.ngram_max).items():
        j = v.vocabulary.get(gram)
        if j is None:
            continue
        if v._remap is not None:
            out = v._remap.get(j)
            if out is None:
                continue
        else:
            out = j
        weights[out] = count * v.idf[j]
    if v.normalize and weights:
        norm = math.sqrt(sum(w * w for w in weights.values()))
        weights = {j: w / norm for j, w in weights.items()}
    return SparseVector.from_mapping(weights)


def fisher_scores(X: Sequence[SparseVector] | sp.spmatrix, y: Sequence[Hashable],
                  n_features: int | None = None) -> np.ndarray:
    """Per-feature ``sum_c n_c (mu_c - mu)^2 / (sum_c n_c var_c + eps)``; absent entries are 0."""
    if not sp.issparse(X):
        if n_features is None:
            n_features = 1 + max((v.indices[-1] for v in X if v.indices), default=-1)
        X = to_csr(X, n_features)
    X = sp.csr_matrix(X, dtype=np.float64)
    n = X.shape[0]
    if n != len(y):
        raise ValueError("X and y differ in length")
    if n < 2:
        raise ValueError("need at least two samples")
    classes = list(dict.fromkeys(y))
    if len(classes) < 2:
        raise ValueError("fisher score needs at least two classes")
    y_arr = np.array([classes.index(v) for v in y])
    mu = np.asarray(X.mean(axis=0)).ravel()
    between = np.zeros(X.shape[1])
    within = np.zeros(X.shape[1])
    for c in range(len(classes)):
        Xc = X[y_arr == c]
        n_c = Xc.shape[0]
        mu_c = np.asarray(Xc.mean(axis=0)).ravel()
        sq_c = np.asarray(Xc.multiply(Xc).sum(axis=0)).ravel()
        between += n_c * (mu_c - mu) ** 2
        # n_c * var_c == sum x^2 - n_c mu_c^2
        within += np.maximum(sq_c - n_c * mu_c ** 2, 0.0)
    return between / (within + FISHER_EPS)


def select_top_k(scores: Sequence[float], k: int) -> list[int]:
    """Indices of the ``k`` largest scores (ties to the lower index), ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    return sorted(order[:k].tolist())


def default_selection(scores: Sequence[float], cap: int = DEFAULT_TOP_K_CAP) -> list[int]:
    """Every feature with a positive score, keeping at most ``cap`` of them."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = int((scores > 0).sum())
    if positive == 0:
        return []
    return select_top_k(scores, min(positive, cap))
