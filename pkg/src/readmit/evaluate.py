"""Confusion matrices, macro/micro metrics, splits and cross-validation."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import N_CLASSES, FeatureMatrix
from .learners import LearnerSpec, fit, predict
from .seeding import derive_seed, rng

SCALARS = (
    "accuracy", "macro_precision", "macro_recall", "macro_f1",
    "micro_precision", "micro_recall", "micro_f1",
)


def confusion(y_true, y_pred, k: int = N_CLASSES) -> np.ndarray:
    """K x K counts; entry (i, j) counts rows of true class i predicted j."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    for name, v in (("y_true", y_true), ("y_pred", y_pred)):
        if v.size and (v.min() < 0 or v.max() >= k):
            raise ValueError(f"{name} has labels outside 0..{k - 1}")
    return np.bincount(y_true * k + y_pred, minlength=k * k).reshape(k, k)


@dataclass
class EvalReport:
    confusion: list
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    per_class_precision: list = field(default_factory=list)
    per_class_recall: list = field(default_factory=list)
    per_class_f1: list = field(default_factory=list)
    # classes whose precision or recall hit the 0/0 rule
    zero_division_classes: list = field(default_factory=list)
    wall_time_s: float = 0.0

    def scalars(self) -> dict:
        return {k: getattr(self, k) for k in SCALARS}

    def as_dict(self, volatile: bool = False) -> dict:
        d = asdict(self)
        if not volatile:
            d.pop("wall_time_s")
        return d


def _ratio(num, den):
    return num / den if den else 0.0


def metrics(cm, wall_time_s: float = 0.0) -> EvalReport:
    """Accuracy plus macro and micro precision/recall/F1.

    A precision or recall whose denominator is 0 counts as 0, and so does an
    F1 with P + R = 0; affected classes are listed in zero_division_classes.
    """
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    k = cm.shape[0]
    tp = np.diag(cm).astype(np.float64)
    pred = cm.sum(axis=0)
    true = cm.sum(axis=1)
    P = [_ratio(tp[i], pred[i]) for i in range(k)]
    R = [_ratio(tp[i], true[i]) for i in range(k)]
    F = [_ratio(2 * P[i] * R[i], P[i] + R[i]) for i in range(k)]
    zero = [i for i in range(k) if pred[i] == 0 or true[i] == 0]
    TP = float(tp.sum())
    FP = float(pred.sum() - tp.sum())
    FN = float(true.sum() - tp.sum())
    micro_p = _ratio(TP, TP + FP)
    micro_r = _ratio(TP, TP + FN)
    micro_f = _ratio(2 * TP, 2 * TP + FP + FN)
    return EvalReport(
        confusion=cm.tolist(),
        accuracy=TP / total,
        macro_precision=sum(P) / k,
        macro_recall=sum(R) / k,
        macro_f1=sum(F) / k,
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=micro_f,
        per_class_precision=P,
        per_class_recall=R,
        per_class_f1=F,
        zero_division_classes=zero,
        wall_time_s=wall_time_s,
    )


def mean_report(reports) -> dict:
    """Average each scalar metric across reports (not a pooled matrix)."""
    out = {k: float(np.mean([getattr(r, k) for r in reports])) for k in SCALARS}
    out["wall_time_s"] = float(np.sum([r.wall_time_s for r in reports]))
    return out


# ---------------------------------------------------------------- splitting

def _train_count(fraction: float, n: int) -> int:
    # round first so 0.8 * 100 does not become 81 under ceil
    return int(math.ceil(round(fraction * n, 9)))


def split_indices(y, train_fraction: float, seed: int, stratified: bool = True):
    """Seeded shuffle then partition. The training side receives
    ceil(fraction * n) rows; under stratification that total is shared out
    by largest remainder so each class is within one row of its quota."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    y = np.asarray(y)
    n = len(y)
    gen = rng(seed, "split")
    n_train = _train_count(train_fraction, n)
    if not stratified:
        perm = gen.permutation(n)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])
    groups = []
    for c in range(N_CLASSES):
        idx = np.flatnonzero(y == c)
        if len(idx) == 0:
            raise ValueError(f"class {c} has no rows; cannot stratify")
        groups.append(gen.permutation(idx))
    quota = [train_fraction * len(g) for g in groups]
    take = [int(math.floor(round(q, 9))) for q in quota]
    order = sorted(range(N_CLASSES), key=lambda c: (-(quota[c] - take[c]), c))
    for c in order[: max(0, n_train - sum(take))]:
        take[c] += 1
    train = np.concatenate([g[:t] for g, t in zip(groups, take)])
    test = np.concatenate([g[t:] for g, t in zip(groups, take)])
    return np.sort(train), np.sort(test)


def split(m: FeatureMatrix, train_fraction: float, seed: int, stratified: bool = True):
    tr, te = split_indices(m.y, train_fraction, seed, stratified)
    return m.take(tr), m.take(te)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    stratified: bool
    seed: int

    def test_rows(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == f)

    def train_rows(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != f)


def make_folds(y, k: int, seed: int, stratified: bool = True) -> FoldPlan:
    """Deal shuffled rows round-robin into k folds.

    With stratification the per-class shuffles are concatenated before
    dealing, so both overall and per-class fold sizes differ by at most 1.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    y = np.asarray(y)
    n = len(y)
    if n < k:
        raise ValueError(f"{n} rows cannot fill {k} folds")
    gen = rng(seed, "folds", k)
    if stratified:
        order = np.concatenate([gen.permutation(np.flatnonzero(y == c)) for c in range(N_CLASSES)])
    else:
        order = gen.permutation(n)
    assign = np.empty(n, dtype=np.int64)
    assign[order] = np.arange(n) % k
    return FoldPlan(k, assign, stratified, seed)


def evaluate(spec: LearnerSpec, train: FeatureMatrix, test: FeatureMatrix):
    """Fit on ``train``; return (EvalReport on ``test``, TrainedModel)."""
    model = fit(spec, train.X, train.y)
    report = metrics(confusion(test.y, predict(model, test.X)), model.wall_time_s)
    return report, model


def cross_validate(spec: LearnerSpec, m: FeatureMatrix, plan: FoldPlan):
    """Return (one EvalReport per fold, mean of the scalar metrics).

    Fold f trains a model seeded from (spec.seed, f) on every row outside f.
    """
    if len(plan.assignments) != m.n:
        raise ValueError("fold plan does not match the matrix row count")
    reports = []
    for f in range(plan.k):
        fold_spec = LearnerSpec(spec.family, spec.params, derive_seed(spec.seed, "fold", f))
        t0 = time.perf_counter()
        rep, _ = evaluate(fold_spec, m.take(plan.train_rows(f)), m.take(plan.test_rows(f)))
        rep.wall_time_s = time.perf_counter() - t0
        reports.append(rep)
    return reports, mean_report(reports)
