"""CART decision trees and bagged random forests (Gini, majority vote)."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..seeding import derive_seed
from . import _tree
from .base import N_CLASSES, argmax_lowest, one_hot, resolve_max_features


class DecisionTreeClassifier:
    def __init__(self, max_depth=None, min_samples_split=2, min_samples_leaf=1,
                 max_features=None, seed=0):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.seed = seed

    def fit(self, X, y):
        n, p = X.shape
        XT = _tree.transpose(X)
        self.tree_, _ = _tree.grow_tree(
            XT, one_hot(y), np.arange(n), _tree.presort(XT),
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
            min_samples_leaf=self.min_samples_leaf,
            max_features=resolve_max_features(self.max_features, p),
            seed=derive_seed(self.seed, "split-features"),
        )
        return self

    def predict_proba(self, X):
        counts = self.tree_.value[self.tree_.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)

    def predict(self, X):
        return argmax_lowest(self.tree_.value[self.tree_.apply(X)])

    def to_dict(self):
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
            "seed": self.seed,
            "tree": self.tree_.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        self = cls(d["max_depth"], d["min_samples_split"], d["min_samples_leaf"],
                   d["max_features"], d["seed"])
        self.tree_ = _tree.Tree.from_dict(d["tree"])
        return self


class RandomForestClassifier:
    """Bootstrap-aggregated CART trees with per-split feature subsampling.

    ``bootstrap=False`` grows every tree on the full training set; with one
    tree and all features this reproduces DecisionTreeClassifier exactly.
    Tree ``t`` draws its bootstrap and feature subsets from a seed derived
    from (seed, t), so ``n_jobs`` does not change the fitted forest.
    """

    def __init__(self, n_estimators=100, max_depth=None, min_samples_split=2,
                 min_samples_leaf=1, max_features="auto", bootstrap=True, n_jobs=1, seed=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.n_jobs = n_jobs
        self.seed = seed

    def _grow_one(self, XT, y1h, global_sorted, t):
        p, n = XT.shape
        if self.bootstrap:
            gen = np.random.default_rng(derive_seed(self.seed, "bootstrap", t))
            counts = np.bincount(gen.integers(0, n, size=n), minlength=n).astype(np.int64)
            samples, sorted_idx = _tree.expand_presort(global_sorted, counts)
        else:
            samples, sorted_idx = np.arange(n), global_sorted.copy()
        tree, _ = _tree.grow_tree(
            XT, y1h, samples, sorted_idx,
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
            min_samples_leaf=self.min_samples_leaf,
            max_features=resolve_max_features(self.max_features, p),
            seed=derive_seed(self.seed, "split-features", t),
        )
        return tree

    def fit(self, X, y):
        XT = _tree.transpose(X)
        global_sorted = _tree.presort(XT)
        y1h = one_hot(y)
        work = range(self.n_estimators)
        if self.n_jobs and self.n_jobs > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                self.trees_ = list(pool.map(lambda t: self._grow_one(XT, y1h, global_sorted, t), work))
        else:
            self.trees_ = [self._grow_one(XT, y1h, global_sorted, t) for t in work]
        self._leaf_class = [argmax_lowest(t.value) for t in self.trees_]
        return self

    def votes(self, X):
        out = np.zeros((X.shape[0], N_CLASSES), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree, cls in zip(self.trees_, self._leaf_class):
            np.add.at(out, (rows, cls[tree.apply(X)]), 1)
        return out

    def predict(self, X):
        return argmax_lowest(self.votes(X))

    def to_dict(self):
        return {
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, d):
        self = cls(d["n_estimators"], d["max_depth"], d["min_samples_split"],
                   d["min_samples_leaf"], d["max_features"], d["bootstrap"], 1, d["seed"])
        self.trees_ = [_tree.Tree.from_dict(t) for t in d["trees"]]
        self._leaf_class = [argmax_lowest(t.value) for t in self.trees_]
        return self
