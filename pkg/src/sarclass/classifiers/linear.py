"""Multinomial logistic regression and the averaged perceptron."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import log_softmax, softmax


class SoftmaxRegression:
    """L2-regularized multinomial logistic regression fit by full-batch gradient descent.

    With ``accelerated`` the step is taken from Nesterov's look-ahead point with
    momentum ``t / (t + 3)``; otherwise it is plain gradient descent.
    """

    kind = "lr"

    def __init__(self, l2=1e-4, learning_rate=0.1, epochs=500, tol=1e-6, accelerated=True):
        self.l2 = l2
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.tol = tol
        self.accelerated = accelerated
        self.W = None  # (n_classes, n_features)
        self.b = None
        self.n_iter = 0

    def loss_and_grad(self, W, b, X, Y):
        """Mean cross-entropy plus ``l2/2 * ||W||^2`` (bias unregularized) and its gradient."""
        Z = np.asarray(X @ W.T) + b
        logp = log_softmax(Z, axis=1)
        n = X.shape[0]
        loss = -(Y * logp).sum() / n + 0.5 * self.l2 * (W * W).sum()
        G = (np.exp(logp) - Y) / n
        gW = np.asarray((X.T @ G).T) + self.l2 * W
        gb = G.sum(axis=0)
        return loss, gW, gb

    def fit(self, X: sp.csr_matrix, y: np.ndarray, n_classes: int) -> SoftmaxRegression:
        X = sp.csr_matrix(X, dtype=np.float64)
        Y = np.eye(n_classes)[y]
        W = np.zeros((n_classes, X.shape[1]))
        b = np.zeros(n_classes)
        W_prev, b_prev = W, b
        self.n_iter = 0
        for t in range(self.epochs):
            mu = t / (t + 3) if self.accelerated else 0.0
            VW, Vb = W + mu * (W - W_prev), b + mu * (b - b_prev)
            _, gW, gb = self.loss_and_grad(VW, Vb, X, Y)
            if np.sqrt((gW * gW).sum() + (gb * gb).sum()) < self.tol:
                break
            W_prev, b_prev = W, b
            W = VW - self.learning_rate * gW
            b = Vb - self.learning_rate * gb
            self.n_iter += 1
        self.W, self.b = W, b
        return self

    def decision_function(self, X: sp.csr_matrix) -> np.ndarray:
        return np.asarray(sp.csr_matrix(X) @ self.W.T) + self.b

    def predict_proba(self, X: sp.csr_matrix) -> np.ndarray:
        return softmax(self.decision_function(X), axis=1)

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "b": self.b.tolist(), "n_iter": self.n_iter}

    def load(self, d: dict) -> SoftmaxRegression:
        self.W = np.asarray(d["W"], dtype=np.float64)
        self.b = np.asarray(d["b"], dtype=np.float64)
        self.n_iter = int(d["n_iter"])
        return self


class AveragedPerceptron:
    """Binary perceptron (targets +1/-1) returning the average of all intermediate weights.

    Epoch ``e`` visits samples in the order drawn from ``default_rng([seed, e])``.
    """

    kind = "perceptron"

    def __init__(self, epochs=10, seed=0):
        self.epochs = epochs
        self.seed = seed
        self.w = None
        self.b = 0.0

    def fit(self, X: sp.csr_matrix, s: np.ndarray) -> AveragedPerceptron:
        X = sp.csr_matrix(X, dtype=np.float64)
        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        # an update made after c earlier steps is absent from those c snapshots,
        # so subtracting c * update / total yields the mean of the post-step weights
        u = np.zeros(d)
        ub = 0.0
        c = 0
        indptr, indices, data = X.indptr, X.indices, X.data
        for epoch in range(self.epochs):
            order = np.random.default_rng([self.seed, epoch]).permutation(n)
            for i in order:
                lo, hi = indptr[i], indptr[i + 1]
                idx, val = indices[lo:hi], data[lo:hi]
                yi = s[i]
                if yi * (val @ w[idx] + b) <= 0:
                    w[idx] += yi * val
                    b += yi
                    u[idx] += c * yi * val
                    ub += c * yi
                c += 1
        self.w = w - u / c
        self.b = b - ub / c
        return self

    def decision_function(self, X: sp.csr_matrix) -> np.ndarray:
        return np.asarray(sp.csr_matrix(X) @ self.w).ravel() + self.b

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b}

    def load(self, d: dict) -> AveragedPerceptron:
        self.w = np.asarray(d["w"], dtype=np.float64)
        self.b = float(d["b"])
        return self
