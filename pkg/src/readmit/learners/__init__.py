"""Six classifier families behind one fit/predict contract."""
from dataclasses import dataclass

from .base import (
    LearnerSpec, Param, ParamError, TrainedModel, _bool, _int_at_least, _max_features,
    _positive_real, fit, load_model, predict, save_model,
)
from .boosting import GradientBoostingClassifier
from .logistic import LogisticRegression
from .naive_bayes import GaussianNB
from .svm import LinearSVM
from .trees import DecisionTreeClassifier, RandomForestClassifier


@dataclass(frozen=True)
class Family:
    cls: type
    params: dict
    algorithm: str


_depth = Param(None, _int_at_least(1, allow_none=True), "positive int or null for unlimited")
_split = Param(2, _int_at_least(2), "int >= 2")
_leaf = Param(1, _int_at_least(1), "int >= 1")

FAMILIES = {
    "naive_bayes": Family(GaussianNB, {
        "var_smoothing": Param(1e-9, _positive_real, "positive real"),
    }, "Gaussian likelihood per feature and class; variances + var_smoothing * max variance"),
    "decision_tree": Family(DecisionTreeClassifier, {
        "max_depth": _depth,
        "min_samples_split": _split,
        "min_samples_leaf": _leaf,
        "max_features": Param(None, _max_features, "null (all), 'auto' (sqrt p) or int >= 1"),
    }, "CART, Gini impurity, midpoint thresholds"),
    "random_forest": Family(RandomForestClassifier, {
        "n_estimators": Param(100, _int_at_least(1), "int >= 1"),
        "max_depth": _depth,
        "min_samples_split": _split,
        "min_samples_leaf": _leaf,
        "max_features": Param("auto", _max_features, "null (all), 'auto' (sqrt p) or int >= 1"),
        "bootstrap": Param(True, _bool, "bool"),
        "n_jobs": Param(1, _int_at_least(1), "threads growing trees; does not affect results"),
    }, "bagged CART trees, per-split feature subsampling, majority vote"),
    "gradient_boosting": Family(GradientBoostingClassifier, {
        "learning_rate": Param(0.1, _positive_real, "positive real"),
        "n_estimators": Param(100, _int_at_least(0), "int >= 0"),
        "max_depth": Param(3, _int_at_least(1), "int >= 1"),
    }, "multinomial deviance boosting, K regression trees per round, Newton leaf values"),
    "logistic_regression": Family(LogisticRegression, {
        "C": Param(1.0, _positive_real, "positive real"),
        "max_iter": Param(100, _int_at_least(1), "int >= 1"),
    }, "softmax regression, L2 on weights, full-batch gradient descent with backtracking"),
    "svm": Family(LinearSVM, {
        "C": Param(1.0, _positive_real, "positive real"),
        "max_epochs": Param(1000, _int_at_least(1), "int >= 1"),
    }, "one-vs-rest linear SVM, dual coordinate descent with seeded epoch order, best epoch iterate"),
}

__all__ = [
    "FAMILIES", "LearnerSpec", "ParamError", "TrainedModel", "fit", "predict",
    "save_model", "load_model",
]
