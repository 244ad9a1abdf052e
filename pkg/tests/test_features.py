import math

import numpy as np
import pytest
import scipy.sparse as sp

from sarclass.features import (SparseVector, default_selection, extract_ngrams, fisher_scores,
                               fit_vectorizer, select_top_k, to_csr, transform, Vectorizer)

CORPUS = [
    ["extract", "method", "parser"],
    ["rename", "variable", "parser", "parser"],
    ["fix", "typo"],
    ["extract", "class", "rename", "method"],
    ["update", "version", "number"],
]


def dense_tfidf(corpus, doc, nmin=1, nmax=2):
    """Naive dense computation straight from the definitions."""
    def grams(toks):
        return [" ".join(toks[i:i + n]) for n in range(nmin, nmax + 1)
                for i in range(len(toks) - n + 1)]

    vocab = []
    for d in corpus:
        for g in grams(d):
            if g not in vocab:
                vocab.append(g)
    n = len(corpus)
    row = []
    for term in vocab:
        df = sum(term in grams(d) for d in corpus)
        idf = math.log((1 + n) / (1 + df)) + 1
        row.append(grams(doc).count(term) * idf)
    norm = math.sqrt(sum(w * w for w in row))
    return vocab, [w / norm if norm else 0.0 for w in row]


@pytest.mark.parametrize("doc", CORPUS + [["parser", "method", "extract", "method"]])
def test_transform_matches_dense_oracle(doc):
    v = fit_vectorizer(CORPUS)
    vocab, expected = dense_tfidf(CORPUS, doc)
    assert v.feature_names() == vocab
    got = dict(zip(transform(v, doc).indices, transform(v, doc).values))
    for j, w in enumerate(expected):
        assert abs(got.get(j, 0.0) - w) < 1e-9


def test_transform_matches_sklearn():
    from sklearn.feature_extraction.text import TfidfVectorizer

    docs = [" ".join(d) for d in CORPUS]
    sk = TfidfVectorizer(ngram_range=(1, 2), token_pattern=r"\S+", smooth_idf=True, norm="l2")
    M = sk.fit_transform(docs).toarray()
    v = fit_vectorizer(CORPUS)
    ours = to_csr([transform(v, d) for d in CORPUS], v.n_features).toarray()
    cols = [sk.vocabulary_[name] for name in v.feature_names()]
    assert np.allclose(ours, M[:, cols], atol=1e-12)


def test_ngram_examples():
    assert extract_ngrams(["extract", "method"], 1, 2) == {"extract": 1, "method": 1,
                                                          "extract method": 1}
    assert extract_ngrams(["a"], 1, 2) == {"a": 1}
    assert extract_ngrams([], 1, 2) == {}


def test_idf_examples():
    v = fit_vectorizer([["a", "b"], ["a"]], 1, 1)
    assert v.idf[v.vocabulary["a"]] == pytest.approx(1.0, abs=1e-15)
    assert v.idf[v.vocabulary["b"]] == pytest.approx(math.log(1.5) + 1, abs=1e-12)
    e = fit_vectorizer([[]])
    assert e.vocabulary == {} and e.doc_count == 1
    with pytest.raises(ValueError):
        fit_vectorizer([])


def test_transform_edge_cases():
    v = fit_vectorizer(CORPUS)
    assert len(transform(v, ["unseen", "words"])) == 0
    single = transform(v, ["typo"])
    assert single.values == (1.0,) or list(single.values) == [1.0]


def test_selection_uses_compact_indices():
    v = fit_vectorizer(CORPUS, 1, 1)
    sel = v.with_selection(sorted([v.vocabulary["parser"], v.vocabulary["method"]]))
    x = sel.transform(["parser", "method", "fix"])
    assert list(x.indices) == [0, 1] and sel.n_features == 2
    assert sel.feature_names() == ["method", "parser"]
    with pytest.raises(ValueError):
        v.with_selection([2, 1])
    assert Vectorizer.from_dict(sel.to_dict()).transform(["parser"]) == sel.transform(["parser"])


def test_sparse_vector_invariants():
    with pytest.raises(ValueError):
        SparseVector((2, 1), (1.0, 1.0))
    with pytest.raises(ValueError):
        SparseVector((0,), (0.0,))


def dense_fisher(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    mu = X.mean(axis=0)
    num = np.zeros(X.shape[1])
    den = np.zeros(X.shape[1])
    for c in np.unique(y):
        Xc = X[y == c]
        num += len(Xc) * (Xc.mean(axis=0) - mu) ** 2
        den += len(Xc) * Xc.var(axis=0)
    return num / (den + 1e-12)


def test_fisher_matches_dense_definition():
    rng = np.random.default_rng(0)
    X = rng.random((30, 6)) * (rng.random((30, 6)) < 0.5)
    y = rng.integers(0, 3, 30)
    assert np.allclose(fisher_scores(sp.csr_matrix(X), y.tolist()), dense_fisher(X, y),
                       rtol=1e-9, atol=1e-12)


def test_fisher_examples():
    X = sp.csr_matrix(np.array([[1.0, 0.3], [1.0, 0.3], [0.0, 0.3], [0.0, 0.3]]))
    s = fisher_scores(X, ["A", "A", "B", "B"])
    assert s[1] == 0.0
    assert s[0] == pytest.approx(4 * 0.25 / 1e-12, rel=1e-9)
    with pytest.raises(ValueError):
        fisher_scores(X, ["A"] * 4)


def test_fisher_scale_invariance():
    rng = np.random.default_rng(1)
    X = rng.random((20, 4))
    y = ["A"] * 10 + ["B"] * 10
    base = fisher_scores(sp.csr_matrix(X), y)
    X2 = X.copy()
    X2[:, 2] *= 37.5
    assert abs(fisher_scores(sp.csr_matrix(X2), y)[2] / base[2] - 1) < 1e-9


def test_select_top_k_examples():
    assert select_top_k([0.1, 0.9, 0.5], 2) == [1, 2]
    assert select_top_k([0.1, 0.9, 0.5], 10) == [0, 1, 2]
    assert select_top_k([0.5, 0.5], 1) == [0]
    with pytest.raises(ValueError):
        select_top_k([1.0], 0)


def test_default_selection_keeps_positive_scores_with_cap():
    assert default_selection([0.0, 2.0, 0.0, 1.0]) == [1, 3]
    assert default_selection([0.0, 0.0]) == []
    assert default_selection(np.arange(1, 11, dtype=float), cap=3) == [7, 8, 9]
