"""CART trees over sparse nonnegative-or-signed features, random forests, and
gradient-boosted trees with logistic loss.

Split search works directly on the CSR training matrix: for each candidate
column the node's nonzero entries are sorted together with one synthetic entry
carrying the statistics of the implicit zeros, so every threshold between
distinct values is scored in a single vectorized pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray    # int, LEAF for leaves
    threshold: np.ndarray  # go left when x[feature] <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # (n_nodes, n_outputs)
    gain: np.ndarray       # weighted impurity decrease at each split node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: sp.csr_matrix) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        n = X.shape[0]
        out = np.zeros(n, dtype=np.int64)
        for lo in range(0, n, 512):
            block = X[lo:lo + 512].toarray()
            node = np.zeros(block.shape[0], dtype=np.int64)
            active = self.feature[node] != LEAF
            rows = np.arange(block.shape[0])
            while active.any():
                r = rows[active]
                nd = node[r]
                go_left = block[r, self.feature[nd]] <= self.threshold[nd]
                node[r] = np.where(go_left, self.left[nd], self.right[nd])
                active[r] = self.feature[node[r]] != LEAF
            out[lo:lo + block.shape[0]] = node
        return out

    def predict(self, X: sp.csr_matrix) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Tree:
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64).reshape(len(d["feature"]), -1),
            np.asarray(d["gain"], dtype=np.float64),
        )


def _node_entries(X: sp.csr_matrix, rows: np.ndarray):
    """Column, value and node-local row of every stored entry in ``rows``."""
    starts = X.indptr[rows]
    lens = X.indptr[rows + 1] - starts
    total = int(lens.sum())
    if total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, np.zeros(0), empty
    offsets = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
    ent = offsets + np.arange(total)
    local = np.repeat(np.arange(len(rows)), lens)
    return X.indices[ent].astype(np.int64), X.data[ent], local


def _best_split(cols, vals, local, stats, candidates, kind):
    """Best ``(feature, threshold, gain)`` among ``candidates``, or None.

    ``stats`` is (n_node, s): class weights for ``kind == "gini"``, or
    (weight, weighted residual) for ``kind == "mse"``.
    """
    n_node = stats.shape[0]
    total = stats.sum(axis=0)
    cand = np.asarray(candidates, dtype=np.int64)
    keep = np.isin(cols, cand)
    c, v, s = cols[keep], vals[keep], stats[local[keep]]
    cnt = np.ones(len(c))
    # one synthetic entry per candidate column for its implicit zeros
    nnz = np.bincount(np.searchsorted(cand, c), minlength=len(cand)).astype(np.float64)
    col_sum = np.zeros((len(cand), stats.shape[1]))
    np.add.at(col_sum, np.searchsorted(cand, c), s)
    zero_cnt = n_node - nnz
    has_zero = zero_cnt > 0
    c = np.concatenate([c, cand[has_zero]])
    v = np.concatenate([v, np.zeros(int(has_zero.sum()))])
    s = np.concatenate([s, (total - col_sum)[has_zero]])
    cnt = np.concatenate([cnt, zero_cnt[has_zero]])
    if len(c) < 2:
        return None
    order = np.lexsort((v, c))
    c, v, s, cnt = c[order], v[order], s[order], cnt[order]
    cs = np.cumsum(s, axis=0)
    ccnt = np.cumsum(cnt)
    new_group = np.ones(len(c), dtype=bool)
    new_group[1:] = c[1:] != c[:-1]
    group_start = np.maximum.accumulate(np.where(new_group, np.arange(len(c)), 0))
    base = np.where((group_start > 0)[:, None], cs[group_start - 1], 0.0)
    base_cnt = np.where(group_start > 0, ccnt[group_start - 1], 0.0)
    left = cs - base
    left_cnt = ccnt - base_cnt
    valid = np.zeros(len(c), dtype=bool)
    valid[:-1] = (c[:-1] == c[1:]) & (v[:-1] < v[1:])
    valid &= (left_cnt >= 1) & (left_cnt <= n_node - 1)
    if not valid.any():
        return None
    right = total - left
    if kind == "gini":
        wl = left.sum(axis=1)
        wr = right.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            proxy = (left ** 2).sum(axis=1) / wl + (right ** 2).sum(axis=1) / wr
        parent = (total ** 2).sum() / total.sum()
    else:
        wl, wr = left[:, 0], right[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            proxy = left[:, 1] ** 2 / wl + right[:, 1] ** 2 / wr
        parent = total[1] ** 2 / total[0]
    proxy = np.where(valid & (wl > 0) & (wr > 0), proxy, -np.inf)
    best = int(np.argmax(proxy))
    if not np.isfinite(proxy[best]):
        return None
    gain = float(proxy[best] - parent)
    # impure classification nodes may split without gain (XOR-like data)
    if kind == "mse" and gain <= 1e-12 * max(1.0, abs(parent)):
        return None
    gain = max(gain, 0.0)
    feat = int(c[best])
    lo, hi = float(v[best]), float(v[best + 1])
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return feat, thr, gain


def _feature_values(cols, vals, local, n_node, feature):
    x = np.zeros(n_node)
    m = cols == feature
    x[local[m]] = vals[m]
    return x


def grow_tree(X: sp.csr_matrix, stats: np.ndarray, *, kind: str, leaf_value,
              max_depth: int | None = None, max_features: int | None = None,
              rng: np.random.Generator | None = None, min_leaf: int = 1) -> Tree:
    """Grow a tree on the rows of ``X`` (all rows must carry positive weight).

    ``leaf_value(stats_rows) -> array`` produces each node's stored output.
    With ``max_features`` set, that many non-constant features are drawn per node.
    """
    n, d = X.shape
    feature, threshold, left, right, value, gain = [], [], [], [], [], []

    def new_node(rows):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(np.asarray(leaf_value(stats[rows]), dtype=np.float64))
        gain.append(0.0)
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if len(rows) < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
            continue
        st = stats[rows]
        if kind == "gini" and np.count_nonzero(st.sum(axis=0) > 0) <= 1:
            continue
        cols, vals, local = _node_entries(X, rows)
        if len(cols) == 0:
            continue
        if max_features is None:
            candidates = np.unique(cols)
        else:
            nnz = np.bincount(cols, minlength=d)
            nonconst = (nnz > 0) & (nnz < len(rows))
            full = np.flatnonzero(nnz == len(rows))
            if len(full):
                lo = np.full(d, np.inf)
                hi = np.full(d, -np.inf)
                np.minimum.at(lo, cols, vals)
                np.maximum.at(hi, cols, vals)
                nonconst[full] = lo[full] < hi[full]
            perm = rng.permutation(d)
            candidates = np.sort(perm[nonconst[perm]][:max_features])
            if len(candidates) == 0:
                continue
        found = _best_split(cols, vals, local, st, candidates, kind)
        if found is None:
            continue
        feat, thr, g = found
        x = _feature_values(cols, vals, local, len(rows), feat)
        go_left = x <= thr
        if go_left.sum() < min_leaf or (~go_left).sum() < min_leaf:
            continue
        feature[node], threshold[node], gain[node] = feat, thr, g
        lrows, rrows = rows[go_left], rows[~go_left]
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))

    return Tree(
        np.asarray(feature, dtype=np.int64), np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
        np.vstack(value), np.asarray(gain, dtype=np.float64),
    )


def _class_distribution(st):
    tot = st.sum(axis=0)
    return tot / tot.sum()


class RandomForest:
    """Bagged Gini trees; scores are the fraction of trees voting for each class."""

    kind = "rf"

    def __init__(self, n_trees=100, max_features="sqrt", bootstrap=True, min_leaf=1,
                 max_depth=None, seed=0):
        self.n_trees = n_trees
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.seed = seed
        self.trees: list[Tree] = []
        self.n_classes = 0
        self.n_features = 0

    def _n_candidates(self, d):
        mf = self.max_features
        if mf in (None, "all"):
            return None
        if mf == "sqrt":
            return max(1, int(math.sqrt(d)))
        return max(1, min(int(mf), d))

    def fit(self, X: sp.csr_matrix, y: np.ndarray, n_classes: int) -> RandomForest:
        X = sp.csr_matrix(X, dtype=np.float64)
        self.n_classes, self.n_features = n_classes, X.shape[1]
        onehot = np.eye(n_classes)[y]
        m = self._n_candidates(X.shape[1])
        self.trees = []
        for t in range(self.n_trees):
            rng = np.random.default_rng([self.seed, t])
            if self.bootstrap:
                counts = np.bincount(rng.integers(0, X.shape[0], X.shape[0]),
                                     minlength=X.shape[0])
                rows = np.flatnonzero(counts)
                Xt, st = X[rows], onehot[rows] * counts[rows, None]
            else:
                Xt, st = X, onehot
            self.trees.append(grow_tree(Xt, st, kind="gini", leaf_value=_class_distribution,
                                        max_depth=self.max_depth, max_features=m, rng=rng,
                                        min_leaf=self.min_leaf))
        return self

    def votes(self, X: sp.csr_matrix) -> np.ndarray:
        X = sp.csr_matrix(X, dtype=np.float64)
        votes = np.zeros((X.shape[0], self.n_classes))
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            # argmax keeps the first class on ties
            votes[rows, np.argmax(tree.predict(X), axis=1)] += 1
        return votes

    def predict_proba(self, X: sp.csr_matrix) -> np.ndarray:
        return self.votes(X) / len(self.trees)

    def importances(self) -> np.ndarray:
        imp = np.zeros(self.n_features)
        for tree in self.trees:
            split = tree.feature != LEAF
            np.add.at(imp, tree.feature[split], tree.gain[split])
        return imp

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "n_features": self.n_features,
                "trees": [t.to_dict() for t in self.trees]}

    def load(self, d: dict) -> RandomForest:
        self.n_classes, self.n_features = int(d["n_classes"]), int(d["n_features"])
        self.trees = [Tree.from_dict(t) for t in d["trees"]]
        return self


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


class GradientBoosting:
    """Binary logistic-loss boosting of depth-limited regression trees.

    Targets are +1/-1 and every quantity is computed so that flipping the targets
    exactly negates the learned function.
    """

    kind = "gbm"

    def __init__(self, n_rounds=100, max_depth=3, learning_rate=0.1):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.init = 0.0
        self.trees: list[Tree] = []
        self.loss_history: list[float] = []
        self.n_features = 0

    @staticmethod
    def _loss(s, F):
        return float(_softplus(-s * F).mean())

    def fit(self, X: sp.csr_matrix, s: np.ndarray) -> GradientBoosting:
        """``s`` holds +1 for the positive class and -1 otherwise."""
        X = sp.csr_matrix(X, dtype=np.float64)
        self.n_features = X.shape[1]
        s = np.asarray(s, dtype=np.float64)
        n_pos, n_neg = int((s > 0).sum()), int((s < 0).sum())
        self.init = math.log(max(n_pos, 1)) - math.log(max(n_neg, 1)) if n_pos and n_neg else 0.0
        F = np.full(X.shape[0], self.init)
        self.trees, self.loss_history = [], [self._loss(s, F)]
        for _ in range(self.n_rounds):
            # residual s * sigmoid(-s F), written to be exactly odd in s
            resid = s * _sigmoid(-s * F)
            hess = _sigmoid(F) * _sigmoid(-F)
            stats = np.column_stack([np.ones_like(resid), resid, hess])

            def newton(st):
                h = st[:, 2].sum()
                return [st[:, 1].sum() / max(h, 1e-12)]

            tree = grow_tree(X, stats[:, :2], kind="mse", max_depth=self.max_depth,
                             leaf_value=lambda st: [0.0])
            leaves = tree.apply(X)
            for leaf in np.unique(leaves):
                tree.value[leaf] = newton(stats[leaves == leaf])
            step = self.learning_rate
            prev = self.loss_history[-1]
            for _ in range(30):
                cand = F + step * tree.value[leaves, 0]
                loss = self._loss(s, cand)
                if loss <= prev:
                    break
                step /= 2.0
            else:
                break
            tree.value *= step
            F = cand
            self.trees.append(tree)
            self.loss_history.append(loss)
        return self

    def decision_function(self, X: sp.csr_matrix) -> np.ndarray:
        X = sp.csr_matrix(X, dtype=np.float64)
        F = np.full(X.shape[0], self.init)
        for tree in self.trees:
            F += tree.predict(X)[:, 0]
        return F

    def importances(self) -> np.ndarray:
        imp = np.zeros(self.n_features)
        for tree in self.trees:
            split = tree.feature != LEAF
            np.add.at(imp, tree.feature[split], tree.gain[split])
        return imp

    def to_dict(self) -> dict:
        return {"init": self.init, "n_features": self.n_features,
                "loss_history": self.loss_history,
                "trees": [t.to_dict() for t in self.trees]}

    def load(self, d: dict) -> GradientBoosting:
        self.init = float(d["init"])
        self.n_features = int(d["n_features"])
        self.loss_history = list(d["loss_history"])
        self.trees = [Tree.from_dict(t) for t in d["trees"]]
        return self
