"""Exhaustive grid search under k-fold cross-validation."""
from __future__ import annotations

import itertools
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .evaluate import FoldPlan, cross_validate, make_folds
from .features import FeatureMatrix
from .learners import FAMILIES, LearnerSpec
from .seeding import derive_seed

log = logging.getLogger(__name__)

SIGNIFICANCE_GAP = 0.01


class NoGridError(ValueError):
    pass


@dataclass(frozen=True)
class ParamGrid:
    family: str
    axes: dict  # param name -> list of values, in enumeration order

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        for name, values in self.axes.items():
            if not values:
                raise ValueError(f"axis {name!r} is empty")
            for v in values:
                LearnerSpec(self.family, {name: v}).resolved()

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.axes.values())

    def configs(self) -> list[dict]:
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*self.axes.values())]


def _logspace(lo_exp: float, hi_exp: float, num: int) -> list[float]:
    vals = [float(v) for v in np.logspace(lo_exp, hi_exp, num)]
    vals[0], vals[-1] = 10.0 ** lo_exp, 10.0 ** hi_exp
    return vals


BUILTIN_AXES = {
    "gradient_boosting": {
        "learning_rate": [1.0, 0.5, 0.1],
        "n_estimators": [50, 100, 150],
        "max_depth": [1, 2, 3, 4, 5, 6],
    },
    "random_forest": {
        "n_estimators": [100, 200, 500],
        "max_depth": [6, 10, 20],
        "min_samples_split": [2, 3, 4],
        "max_features": [5, 61, "auto"],
    },
    "decision_tree": {
        "max_depth": [2, 5, 10, None],
        "min_samples_split": [2, 3, 4, 5],
        "min_samples_leaf": [1, 2, 3],
        "max_features": [10, 30, 61, "auto"],
    },
    "logistic_regression": {
        "C": _logspace(-4, 4, 15),
        "max_iter": [5000, 10000, 20000, 30000],
    },
    "svm": {
        "C": [0.1, 1.0, 10.0, 100.0],
    },
}


def builtin_grid(family: str) -> ParamGrid:
    if family == "naive_bayes":
        raise NoGridError("naive_bayes has no tunable grid")
    if family not in BUILTIN_AXES:
        raise ValueError(f"unknown family {family!r}")
    return ParamGrid(family, {k: list(v) for k, v in BUILTIN_AXES[family].items()})


def load_grids(path) -> dict[str, ParamGrid]:
    """Read ``{"family": {"param": [values...]}}`` overrides from JSON."""
    with open(path) as fh:
        doc = json.load(fh)
    return {fam: ParamGrid(fam, axes) for fam, axes in doc.items()}


def budget_indices(n: int, budget: int | None) -> list[int]:
    """Configurations kept under a budget: evenly spaced over the
    enumeration order, always including the first."""
    if budget is None or budget >= n:
        return list(range(n))
    if budget < 1:
        raise ValueError("budget must be positive")
    return sorted({(i * n) // budget for i in range(budget)})


@dataclass
class GridRow:
    index: int
    params: dict
    fold_accuracies: list
    mean_accuracy: float
    mean_scores: dict
    rank: int = 0


@dataclass
class GridSearchResult:
    family: str
    axes: dict
    k: int
    seed: int
    rows: list = field(default_factory=list)
    grid_size: int = 0

    @property
    def best(self) -> dict:
        return min(self.rows, key=lambda r: r.rank).params

    def ranked(self) -> list[GridRow]:
        return sorted(self.rows, key=lambda r: r.rank)


def rank_rows(rows) -> None:
    """Rank 1 = highest mean accuracy; ties keep enumeration order."""
    for rank, row in enumerate(sorted(rows, key=lambda r: (-r.mean_accuracy, r.index)), 1):
        row.rank = rank


def grid_search(grid: ParamGrid, m: FeatureMatrix, k: int = 5, seed: int = 0,
                budget: int | None = None, plan: FoldPlan | None = None) -> GridSearchResult:
    """Evaluate every configuration on one shared fold plan."""
    configs = grid.configs()
    if not configs:
        raise ValueError("empty grid")
    plan = plan or make_folds(m.y, k, derive_seed(seed, "tune-folds"))
    result = GridSearchResult(grid.family, grid.axes, plan.k, seed, grid_size=len(configs))
    for i in budget_indices(len(configs), budget):
        params = configs[i]
        spec = LearnerSpec(grid.family, params, derive_seed(seed, grid.family, i))
        try:
            reports, mean = cross_validate(spec, m, plan)
        except Exception as exc:
            raise RuntimeError(f"{grid.family} {params}: {exc}") from exc
        log.info("%s %s -> %.4f", grid.family, params, mean["accuracy"])
        result.rows.append(GridRow(i, params, [r.accuracy for r in reports],
                                   mean["accuracy"], mean))
    rank_rows(result.rows)
    return result


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _describe(values) -> dict:
    if all(_is_number(v) for v in values):
        arr = np.asarray(values, dtype=np.float64)
        return {"mean": float(arr.mean()), "std": float(arr.std())}
    freq = Counter("None" if v is None else str(v) for v in values)
    return {"frequency": dict(sorted(freq.items()))}


def summarize(result: GridSearchResult, n: int = 10) -> dict:
    """Mean and population std of each parameter over the top-n and
    bottom-n configurations; parameters with any non-numeric value in a
    group get a frequency table for that group instead."""
    rows = result.ranked()
    if len(rows) < 2 * n:
        raise ValueError(f"{len(rows)} configurations cannot supply top and bottom {n}")
    top, bottom = rows[:n], rows[-n:]
    return {
        name: {
            "top": _describe([r.params[name] for r in top]),
            "bottom": _describe([r.params[name] for r in bottom]),
        }
        for name in result.axes
    }


def significance(before: float, after: float) -> str:
    for v in (before, after):
        if not 0.0 <= v <= 1.0:
            raise ValueError("accuracies must lie in [0, 1]")
    return "significant" if abs(after - before) > SIGNIFICANCE_GAP else "insignificant"
