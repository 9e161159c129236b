import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from readmit.learners import FAMILIES, LearnerSpec, ParamError, fit, load_model, predict, save_model
from readmit.learners.boosting import GradientBoostingClassifier
from readmit.learners.logistic import LogisticRegression, loss_and_grad
from readmit.learners.naive_bayes import GaussianNB
from readmit.learners.svm import LinearSVM
from readmit.learners.trees import DecisionTreeClassifier, RandomForestClassifier

FAST = {
    "naive_bayes": {},
    "decision_tree": {},
    "random_forest": {"n_estimators": 7},
    "gradient_boosting": {"n_estimators": 8},
    "logistic_regression": {"max_iter": 50},
    "svm": {"max_epochs": 20},
}


def blobs(n=150, p=4, seed=0):
    gen = np.random.default_rng(seed)
    y = gen.integers(0, 3, size=n)
    X = gen.normal(size=(n, p)) + y[:, None] * 1.5
    return X, y


# ---------------------------------------------------------------- contract

@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_deterministic_under_seed(family):
    X, y = blobs()
    a = fit(LearnerSpec(family, FAST[family], seed=5), X, y)
    b = fit(LearnerSpec(family, FAST[family], seed=5), X, y)
    np.testing.assert_array_equal(predict(a, X), predict(b, X))
    assert a.estimator.to_dict() == b.estimator.to_dict()


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_persistence_round_trip(family, tmp_path):
    X, y = blobs()
    m = fit(LearnerSpec(family, FAST[family], seed=1), X, y)
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.manifest() == m.manifest()
    np.testing.assert_array_equal(predict(back, X), predict(m, X))


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_empty_predict_and_width_check(family):
    X, y = blobs(30)
    m = fit(LearnerSpec(family, FAST[family]), X, y)
    assert predict(m, np.zeros((0, 4))).shape == (0,)
    with pytest.raises(ValueError, match="width"):
        predict(m, np.zeros((2, 5)))


@pytest.mark.parametrize("family", ["naive_bayes", "decision_tree", "random_forest"])
def test_single_training_point(family):
    m = fit(LearnerSpec(family, FAST[family]), np.array([[1.0, 2.0]]), np.array([2]))
    assert predict(m, np.array([[1.0, 2.0]])).tolist() == [2]


def test_param_validation():
    with pytest.raises(ParamError, match="unknown parameter"):
        LearnerSpec("svm", {"gamma": 1}).resolved()
    with pytest.raises(ParamError, match="invalid value"):
        LearnerSpec("gradient_boosting", {"learning_rate": -1}).resolved()
    with pytest.raises(ParamError, match="unknown family"):
        LearnerSpec("knn").resolved()
    with pytest.raises(ValueError, match="non-empty"):
        fit(LearnerSpec("naive_bayes"), np.zeros((0, 2)), np.zeros(0, dtype=int))


# -------------------------------------------------------------- naive bayes

def _gauss_logpdf(x, mu, var):
    return -0.5 * math.log(2 * math.pi * var) - (x - mu) ** 2 / (2 * var)


def test_nb_two_point_example():
    X = np.array([[0.0], [0.0], [4.0], [4.0]])
    y = np.array([0, 0, 1, 1])
    nb = GaussianNB().fit(X, y)
    eps = 1e-9 * 4.0  # smoothing scales with the feature variance (4)
    logp = [math.log(0.5) + _gauss_logpdf(1.0, mu, eps) for mu in (0.0, 4.0)]
    assert logp[0] > logp[1]
    assert nb.predict(np.array([[1.0]])).tolist() == [0]
    assert nb.epsilon_ == pytest.approx(eps, rel=1e-12)


def test_nb_matches_hand_density():
    X, y = blobs(90, 3, seed=4)
    nb = GaussianNB().fit(X, y)
    eps = 1e-9 * X.var(axis=0).max()
    x = np.array([0.3, -1.2, 2.0])
    hand = []
    for c in range(3):
        rows = X[y == c]
        ll = math.log(len(rows) / len(X))
        for j in range(3):
            ll += _gauss_logpdf(x[j], rows[:, j].mean(), rows[:, j].var() + eps)
        hand.append(ll)
    np.testing.assert_allclose(nb.joint_log_likelihood(x[None])[0], hand, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, (20, 3), elements=st.floats(-1e4, 1e4, allow_nan=False)),
       st.integers(0, 100))
def test_nb_posteriors_sum_to_one(X, seed):
    y = np.random.default_rng(seed).integers(0, 3, size=20)
    proba = GaussianNB().fit(X, y).predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)


# -------------------------------------------------------------------- trees

def test_dt_memorizes_consistent_data():
    X, y = blobs(200, 3, seed=2)
    m = fit(LearnerSpec("decision_tree"), X, y)
    assert (predict(m, X) == y).all()


def _gini_oracle(X, y):
    """Exact best root split: minimal weighted Gini over every feature and
    midpoint threshold, first in (feature, threshold) order on ties."""
    n, p = X.shape
    best = None
    for f in range(p):
        vals = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(vals, vals[1:]):
            thr = (lo + hi) / 2
            left = y[X[:, f] <= thr]
            right = y[X[:, f] > thr]
            score = Fraction(0)
            for side in (left, right):
                counts = np.bincount(side, minlength=3)
                g = 1 - sum(Fraction(int(c), len(side)) ** 2 for c in counts)
                score += Fraction(len(side), n) * g
            if best is None or score < best[0]:
                best = (score, f, thr)
    return best


@settings(max_examples=80, deadline=None)
@given(st.integers(4, 30), st.integers(1, 4), st.integers(0, 10 ** 6))
def test_dt_root_split_matches_oracle(n, p, seed):
    gen = np.random.default_rng(seed)
    X = gen.integers(0, 6, size=(n, p)).astype(float)
    y = gen.integers(0, 3, size=n)
    oracle = _gini_oracle(X, y)
    tree = DecisionTreeClassifier(max_depth=1).fit(X, y).tree_
    if oracle is None or len(set(y.tolist())) == 1:
        assert tree.node_count == 1
        return
    score, f, thr = oracle
    counts = np.bincount(y, minlength=3)
    parent = 1 - sum(Fraction(int(c), n) ** 2 for c in counts)
    assert score <= parent
    assert (tree.feature[0], tree.threshold[0]) == (f, thr)


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 60), st.integers(1, 5), st.integers(0, 10 ** 6),
       st.sampled_from([None, 1, 3]), st.integers(2, 4))
def test_rf_single_tree_equals_dt(n, p, seed, depth, min_split):
    gen = np.random.default_rng(seed)
    X = gen.integers(0, 5, size=(n, p)).astype(float)
    y = gen.integers(0, 3, size=n)
    params = dict(max_depth=depth, min_samples_split=min_split, max_features=None)
    dt = DecisionTreeClassifier(seed=seed, **params).fit(X, y)
    rf = RandomForestClassifier(n_estimators=1, bootstrap=False, seed=seed, **params).fit(X, y)
    Xq = gen.integers(-1, 6, size=(50, p)).astype(float)
    np.testing.assert_array_equal(rf.predict(Xq), dt.predict(Xq))
    assert rf.trees_[0].to_dict() == dt.tree_.to_dict()


def test_rf_threads_do_not_change_result():
    X, y = blobs(120, 6)
    a = RandomForestClassifier(n_estimators=6, seed=3, n_jobs=1).fit(X, y)
    b = RandomForestClassifier(n_estimators=6, seed=3, n_jobs=3).fit(X, y)
    assert a.to_dict() == b.to_dict()


def test_max_features_subsampling_depends_on_seed():
    X, y = blobs(200, 9, seed=8)
    a = DecisionTreeClassifier(max_features=2, seed=1).fit(X, y).tree_.to_dict()
    b = DecisionTreeClassifier(max_features=2, seed=2).fit(X, y).tree_.to_dict()
    assert a != b


# ------------------------------------------------------------------ boosting

def test_gb_zero_rounds_predicts_prior():
    X, y = blobs(60)
    y[:] = np.repeat([1, 1, 0, 2], 15)
    m = fit(LearnerSpec("gradient_boosting", {"n_estimators": 0}), X, y)
    assert (predict(m, X + 100) == 1).all()


def test_gb_prior_tie_goes_to_lowest():
    X = np.zeros((4, 1))
    y = np.array([2, 2, 1, 1])
    m = fit(LearnerSpec("gradient_boosting", {"n_estimators": 0}), X, y)
    assert predict(m, X).tolist() == [1] * 4


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 80), st.integers(1, 4), st.integers(0, 10 ** 6), st.integers(1, 4))
def test_gb_deviance_non_increasing(n, p, seed, depth):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, p)).round(1)
    y = gen.integers(0, 3, size=n)
    gb = GradientBoostingClassifier(learning_rate=0.1, n_estimators=15, max_depth=depth).fit(X, y)
    dev = np.array(gb.train_deviance_)
    assert np.all(np.diff(dev) <= 1e-12 * np.abs(dev[:-1]))


def test_gb_learns():
    X, y = blobs(300)
    m = fit(LearnerSpec("gradient_boosting", {"n_estimators": 30}), X, y)
    assert (predict(m, X) == y).mean() > 0.8


# ------------------------------------------------------------------- logistic

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(1e-2, 1e2))
def test_lr_gradient_matches_finite_differences(seed, C):
    gen = np.random.default_rng(seed)
    n, p = 12, 4
    X = gen.normal(size=(n, p))
    Y = np.eye(3)[gen.integers(0, 3, size=n)]
    W = gen.normal(size=(p, 3))
    b = gen.normal(size=3)
    _, gW, gb = loss_and_grad(W, b, X, Y, C)
    h = 1e-5
    num_W = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        num_W[idx] = (loss_and_grad(Wp, b, X, Y, C)[0] - loss_and_grad(Wm, b, X, Y, C)[0]) / (2 * h)
    num_b = np.zeros(3)
    for k in range(3):
        bp, bm = b.copy(), b.copy()
        bp[k] += h
        bm[k] -= h
        num_b[k] = (loss_and_grad(W, bp, X, Y, C)[0] - loss_and_grad(W, bm, X, Y, C)[0]) / (2 * h)
    analytic = np.concatenate([gW.ravel(), gb])
    numeric = np.concatenate([num_W.ravel(), num_b])
    rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
    assert rel < 1e-5


def test_lr_extreme_regularization_predicts_prior():
    X, y = blobs(90)
    y = np.array([0] * 20 + [1] * 45 + [2] * 25)
    lr = LogisticRegression(C=1e-9, max_iter=200).fit(X, y)
    assert np.abs(lr.coef_).max() < 1e-6
    assert (lr.predict(X * 10) == 1).all()


def test_lr_loss_decreases_with_iterations():
    X, y = blobs(120)
    losses = [LogisticRegression(max_iter=it).fit(X, y).loss_ for it in (1, 5, 50, 500)]
    assert np.all(np.diff(losses) < 0)


def test_lr_stops_at_gradient_tolerance():
    # separable-free tiny problem with a strong penalty converges quickly
    X, y = blobs(30, 2)
    lr = LogisticRegression(C=0.01, max_iter=5000).fit(X, y)
    assert lr.converged_ and lr.n_iter_ < 5000


# ------------------------------------------------------------------------ svm

def test_svm_objective_history_non_increasing():
    X, y = blobs(200, 5, seed=6)
    svm = LinearSVM(C=1.0, max_epochs=40, seed=2).fit(X * 30, y)
    for hist in svm.objective_history_:
        assert np.all(np.diff(hist) <= 0)
        assert hist[-1] < hist[0]


def test_svm_norm_monotone_in_c():
    X, y = blobs(40, 2, seed=7)
    norms = [LinearSVM(C=C, max_epochs=20000, seed=0, tol=1e-9).fit(X, y).weight_norms()
             for C in (0.001, 0.01, 0.1, 1.0, 10.0)]
    norms = np.array(norms)
    assert np.all(np.diff(norms, axis=0) >= -1e-6)


def test_svm_separates_blobs():
    X, y = blobs(300)
    assert (LinearSVM(C=1.0).fit(X, y).predict(X) == y).mean() > 0.8
