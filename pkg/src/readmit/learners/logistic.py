"""Multinomial logistic regression fitted by full-batch gradient descent.

Objective: sum of per-row cross-entropy + ||W||^2 / (2C). The intercepts
are not penalized and start at the log class priors.
"""
from __future__ import annotations

import numpy as np

from .base import N_CLASSES, argmax_lowest, one_hot

GRAD_TOL = 1e-6
ARMIJO = 0.5


def loss_and_grad(W, b, X, Y, C):
    Z = X @ W + b
    top = Z.max(axis=1, keepdims=True)
    E = np.exp(Z - top)
    S = E.sum(axis=1, keepdims=True)
    loss = float(np.sum(np.log(S[:, 0]) + top[:, 0] - np.sum(Z * Y, axis=1)))
    loss += float(np.sum(W * W)) / (2.0 * C)
    D = E / S - Y
    return loss, X.T @ D + W / C, D.sum(axis=0)


def _loss(W, b, X, Y, C):
    Z = X @ W + b
    top = Z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(Z - top).sum(axis=1)) + top[:, 0]
    return float(np.sum(lse - np.sum(Z * Y, axis=1))) + float(np.sum(W * W)) / (2.0 * C)


class LogisticRegression:
    def __init__(self, C=1.0, max_iter=100, seed=0):
        self.C = C
        self.max_iter = max_iter

    def fit(self, X, y):
        n, p = X.shape
        Y = one_hot(y)
        counts = np.bincount(y, minlength=N_CLASSES).astype(np.float64)
        with np.errstate(divide="ignore"):
            b = np.log(counts / n)
        b[~np.isfinite(b)] = -30.0
        W = np.zeros((p, N_CLASSES))
        step = 1.0
        f, gW, gb = loss_and_grad(W, b, X, Y, self.C)
        self.n_iter_ = 0
        self.converged_ = False
        for it in range(self.max_iter):
            g2 = float(np.sum(gW * gW) + np.sum(gb * gb))
            if np.sqrt(g2) < GRAD_TOL:
                self.converged_ = True
                break
            # try a longer step first, then backtrack until Armijo holds
            step *= 2.0
            while True:
                W_new, b_new = W - step * gW, b - step * gb
                f_new = _loss(W_new, b_new, X, Y, self.C)
                if f_new <= f - ARMIJO * step * g2 or step < 1e-300:
                    break
                step *= 0.5
            W, b = W_new, b_new
            f, gW, gb = loss_and_grad(W, b, X, Y, self.C)
            self.n_iter_ = it + 1
        else:
            g2 = float(np.sum(gW * gW) + np.sum(gb * gb))
            self.converged_ = bool(np.sqrt(g2) < GRAD_TOL)
        self.coef_, self.intercept_, self.loss_ = W, b, f
        return self

    def decision_function(self, X):
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return argmax_lowest(self.decision_function(X))

    def to_dict(self):
        return {
            "C": self.C,
            "max_iter": self.max_iter,
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_.tolist(),
            "n_iter": self.n_iter_,
            "converged": self.converged_,
        }

    @classmethod
    def from_dict(cls, d):
        self = cls(d["C"], d["max_iter"])
        self.coef_ = np.asarray(d["coef"], dtype=np.float64).reshape(-1, N_CLASSES)
        self.intercept_ = np.asarray(d["intercept"], dtype=np.float64)
        self.n_iter_ = d["n_iter"]
        self.converged_ = d["converged"]
        return self
