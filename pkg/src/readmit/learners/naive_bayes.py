import numpy as np

from .base import N_CLASSES, argmax_lowest

# variance floor used only when every feature is constant in training
_ABS_FLOOR = 1e-9


class GaussianNB:
    """Per-class, per-feature Gaussian likelihoods, posteriors in log space.

    Every variance is inflated by ``var_smoothing * max feature variance``.
    """

    def __init__(self, var_smoothing=1e-9, seed=0):
        self.var_smoothing = var_smoothing

    def fit(self, X, y):
        counts = np.bincount(y, minlength=N_CLASSES).astype(np.float64)
        eps = self.var_smoothing * float(np.var(X, axis=0).max()) if X.shape[1] else 0.0
        if eps <= 0:
            eps = _ABS_FLOOR
        self.epsilon_ = eps
        p = X.shape[1]
        self.theta_ = np.zeros((N_CLASSES, p))
        self.var_ = np.ones((N_CLASSES, p))
        for c in range(N_CLASSES):
            rows = X[y == c]
            if len(rows):
                self.theta_[c] = rows.mean(axis=0)
                self.var_[c] = rows.var(axis=0) + eps
        with np.errstate(divide="ignore"):
            self.log_prior_ = np.log(counts / counts.sum())
        return self

    def joint_log_likelihood(self, X):
        out = np.empty((X.shape[0], N_CLASSES))
        for c in range(N_CLASSES):
            norm = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_[c]))
            quad = -0.5 * np.sum((X - self.theta_[c]) ** 2 / self.var_[c], axis=1)
            out[:, c] = self.log_prior_[c] + norm + quad
        return out

    def predict_proba(self, X):
        jll = self.joint_log_likelihood(X)
        top = jll.max(axis=1, keepdims=True)
        e = np.exp(jll - top)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X):
        return argmax_lowest(self.joint_log_likelihood(X))

    def to_dict(self):
        return {
            "var_smoothing": self.var_smoothing,
            "epsilon": self.epsilon_,
            "theta": self.theta_.tolist(),
            "var": self.var_.tolist(),
            "log_prior": self.log_prior_.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        self = cls(d["var_smoothing"])
        self.epsilon_ = d["epsilon"]
        self.theta_ = np.asarray(d["theta"], dtype=np.float64)
        self.var_ = np.asarray(d["var"], dtype=np.float64)
        self.log_prior_ = np.asarray(d["log_prior"], dtype=np.float64)
        return self
