"""Multinomial-deviance gradient boosting with K regression trees per round."""
from __future__ import annotations

import numpy as np

from . import _tree
from .base import N_CLASSES, argmax_lowest, one_hot

K = N_CLASSES


def softmax(F):
    top = F.max(axis=1, keepdims=True)
    e = np.exp(F - top)
    return e / e.sum(axis=1, keepdims=True)


def deviance(y, F) -> float:
    """Mean negative log-likelihood of the true class under softmax(F)."""
    top = F.max(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(np.exp(F - top).sum(axis=1))
    return float(np.mean(lse - F[np.arange(len(y)), y]))


def _leaf_values(leaf_of, r, n_nodes):
    num = np.bincount(leaf_of, weights=r, minlength=n_nodes)
    a = np.abs(r)
    den = np.bincount(leaf_of, weights=a * (1.0 - a), minlength=n_nodes)
    out = np.zeros(n_nodes)
    ok = den > 1e-150
    out[ok] = (K - 1) / K * num[ok] / den[ok]
    return out


class GradientBoostingClassifier:
    def __init__(self, learning_rate=0.1, n_estimators=100, max_depth=3, seed=0):
        self.learning_rate = learning_rate
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.seed = seed

    def fit(self, X, y):
        n = X.shape[0]
        counts = np.bincount(y, minlength=K)
        with np.errstate(divide="ignore"):
            self.init_ = np.log(counts / n)
        Y = one_hot(y)
        F = np.tile(self.init_, (n, 1))
        rows = np.arange(n)
        XT = _tree.transpose(X)
        global_sorted = _tree.presort(XT) if self.n_estimators else None
        self.trees_ = []  # one list of K (tree, leaf values) per round
        self.train_deviance_ = [deviance(y, F)]
        for _ in range(self.n_estimators):
            P = softmax(F)
            stage = []
            for k in range(K):
                r = Y[:, k] - P[:, k]
                tree, leaf_of = _tree.grow_tree(
                    XT, r[:, None], rows, global_sorted.copy(), max_depth=self.max_depth,
                )
                vals = _leaf_values(leaf_of, r, tree.node_count)
                F[:, k] += self.learning_rate * vals[leaf_of]
                stage.append((tree, vals))
            self.trees_.append(stage)
            self.train_deviance_.append(deviance(y, F))
        return self

    def decision_function(self, X):
        F = np.tile(self.init_, (X.shape[0], 1))
        for stage in self.trees_:
            for k, (tree, vals) in enumerate(stage):
                F[:, k] += self.learning_rate * vals[tree.apply(X)]
        return F

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        return argmax_lowest(self.decision_function(X))

    def to_dict(self):
        return {
            "learning_rate": self.learning_rate,
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "seed": self.seed,
            "init": [float(v) for v in self.init_],
            "stages": [[{"tree": t.to_dict(), "leaf_values": v.tolist()} for t, v in stage]
                       for stage in self.trees_],
        }

    @classmethod
    def from_dict(cls, d):
        self = cls(d["learning_rate"], d["n_estimators"], d["max_depth"], d["seed"])
        self.init_ = np.asarray(d["init"], dtype=np.float64)
        self.trees_ = [[(_tree.Tree.from_dict(s["tree"]), np.asarray(s["leaf_values"]))
                        for s in stage] for stage in d["stages"]]
        return self
