from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

N_CLASSES = 3


class ParamError(ValueError):
    pass


def one_hot(y, k=N_CLASSES) -> np.ndarray:
    out = np.zeros((len(y), k))
    out[np.arange(len(y)), y] = 1.0
    return out


def argmax_lowest(scores) -> np.ndarray:
    """Row-wise argmax; np.argmax already returns the first maximal index."""
    return np.argmax(scores, axis=1).astype(np.int64)


def resolve_max_features(value, p: int) -> int:
    if value is None:
        return p
    if value == "auto":
        return max(1, int(math.sqrt(p)))
    return max(1, min(int(value), p))


# --- parameter domains ---------------------------------------------------

def _int_at_least(lo, allow_none=False):
    def check(v):
        if v is None and allow_none:
            return True
        return isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v >= lo
    return check


def _positive_real(v):
    return isinstance(v, (int, float, np.number)) and not isinstance(v, bool) and math.isfinite(v) and v > 0


def _max_features(v):
    return v is None or v == "auto" or _int_at_least(1)(v)


def _bool(v):
    return isinstance(v, bool)


@dataclass(frozen=True)
class Param:
    default: object
    valid: object
    doc: str


@dataclass(frozen=True)
class LearnerSpec:
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def resolved(self) -> dict:
        from . import FAMILIES
        if self.family not in FAMILIES:
            raise ParamError(f"unknown family {self.family!r}; known: {sorted(FAMILIES)}")
        schema = FAMILIES[self.family].params
        unknown = set(self.params) - set(schema)
        if unknown:
            raise ParamError(f"{self.family}: unknown parameter(s) {sorted(unknown)}")
        out = {}
        for name, param in schema.items():
            v = self.params.get(name, param.default)
            if not param.valid(v):
                raise ParamError(f"{self.family}: invalid value {v!r} for {name} ({param.doc})")
            out[name] = v
        return out


@dataclass(frozen=True)
class TrainedModel:
    family: str
    params: dict
    seed: int
    width: int
    estimator: object
    wall_time_s: float
    n_classes: int = N_CLASSES

    def predict(self, X) -> np.ndarray:
        return predict(self, X)

    def manifest(self) -> dict:
        return {
            "family": self.family,
            "params": self.params,
            "seed": self.seed,
            "feature_width": self.width,
            "n_classes": self.n_classes,
        }


def fit(spec: LearnerSpec, X, y) -> TrainedModel:
    from . import FAMILIES
    params = spec.resolved()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit needs a non-empty 2-D feature matrix")
    if len(y) != X.shape[0]:
        raise ValueError("label count differs from row count")
    if y.min() < 0 or y.max() >= N_CLASSES:
        raise ValueError(f"labels must lie in 0..{N_CLASSES - 1}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix has non-finite entries")
    t0 = time.perf_counter()
    est = FAMILIES[spec.family].cls(seed=spec.seed, **params).fit(X, y)
    return TrainedModel(spec.family, params, spec.seed, X.shape[1], est,
                        time.perf_counter() - t0)


def predict(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0 and (X.ndim == 1 or X.shape[0] == 0):
        return np.zeros(0, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != model.width:
        raise ValueError(f"expected rows of width {model.width}, got shape {X.shape}")
    return model.estimator.predict(np.ascontiguousarray(X))


def save_model(model: TrainedModel, path) -> None:
    """Write manifest and fitted parameters to one JSON document."""
    doc = model.manifest()
    doc["state"] = model.estimator.to_dict()
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_model(path) -> TrainedModel:
    from . import FAMILIES
    with open(path) as fh:
        doc = json.load(fh)
    cls = FAMILIES[doc["family"]].cls
    est = cls.from_dict(doc["state"])
    return TrainedModel(doc["family"], doc["params"], doc["seed"], doc["feature_width"],
                        est, float("nan"), doc.get("n_classes", N_CLASSES))


