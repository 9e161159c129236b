"""One-vs-rest linear SVMs trained by seeded, epoch-shuffled dual
coordinate descent (the liblinear L1-loss solver).

Per class the primal objective is 0.5 * ||w||^2 + C * sum_i max(0, 1 - y_i w.x_i),
where x carries an appended constant 1 so the bias is part of w. Each epoch
visits every dual variable once in a fresh seeded order and solves its box-
constrained 1-D problem exactly. The primal value is recorded per epoch and
the best iterate so far is kept, so the recorded history is non-increasing.
"""
from __future__ import annotations

import numba as nb
import numpy as np

from ..seeding import derive_seed
from .base import N_CLASSES, argmax_lowest

# stop once the projected-gradient spread of an epoch falls below this
PG_TOL = 0.1


@nb.njit(nogil=True, cache=True)
def _epoch(Xa, s, qdiag, w, alpha, order, C):
    pg_max = -np.inf
    pg_min = np.inf
    for idx in range(order.shape[0]):
        i = order[idx]
        if qdiag[i] <= 0.0:
            continue
        g = 0.0
        for j in range(Xa.shape[1]):
            g += w[j] * Xa[i, j]
        g = s[i] * g - 1.0
        a = alpha[i]
        pg = g
        if a <= 0.0:
            pg = min(g, 0.0)
        elif a >= C:
            pg = max(g, 0.0)
        pg_max = max(pg_max, pg)
        pg_min = min(pg_min, pg)
        if pg != 0.0:
            a_new = min(max(a - g / qdiag[i], 0.0), C)
            d = (a_new - a) * s[i]
            alpha[i] = a_new
            for j in range(Xa.shape[1]):
                w[j] += d * Xa[i, j]
    return pg_max - pg_min


def objective(w, Xa, s, C) -> float:
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - s * (Xa @ w)).sum())


class LinearSVM:
    def __init__(self, C=1.0, max_epochs=1000, seed=0, tol=PG_TOL):
        self.C = C
        self.max_epochs = max_epochs
        self.seed = seed
        self.tol = tol

    def fit(self, X, y):
        n, p = X.shape
        Xa = np.ascontiguousarray(np.hstack([X, np.ones((n, 1))]))
        qdiag = np.einsum("ij,ij->i", Xa, Xa)
        self.coef_ = np.zeros((N_CLASSES, p + 1))
        self.objective_history_ = []
        self.n_epochs_ = []
        for k in range(N_CLASSES):
            s = np.where(y == k, 1.0, -1.0)
            gen = np.random.default_rng(derive_seed(self.seed, "svm", k))
            w = np.zeros(p + 1)
            alpha = np.zeros(n)
            best_w = w.copy()
            best = objective(w, Xa, s, self.C)
            hist = [best]
            epochs = 0
            for _ in range(self.max_epochs):
                spread = _epoch(Xa, s, qdiag, w, alpha, gen.permutation(n), float(self.C))
                epochs += 1
                val = objective(w, Xa, s, self.C)
                if val < best:
                    best, best_w = val, w.copy()
                hist.append(best)
                if spread < self.tol:
                    break
            self.coef_[k] = best_w
            self.objective_history_.append(hist)
            self.n_epochs_.append(epochs)
        return self

    def decision_function(self, X):
        return X @ self.coef_[:, :-1].T + self.coef_[:, -1]

    def predict(self, X):
        return argmax_lowest(self.decision_function(X))

    def weight_norms(self):
        return np.linalg.norm(self.coef_, axis=1)

    def to_dict(self):
        return {"C": self.C, "max_epochs": self.max_epochs, "seed": self.seed,
                "coef": self.coef_.tolist()}

    @classmethod
    def from_dict(cls, d):
        self = cls(d["C"], d["max_epochs"], d["seed"])
        self.coef_ = np.asarray(d["coef"], dtype=np.float64)
        return self
