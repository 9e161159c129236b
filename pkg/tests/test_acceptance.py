"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Criteria 1-6 need the public readmission files. Point READMIT_DATA_DIR at a
directory holding diabetic_data.csv and IDS_mapping.csv (default: ./data in
the repository root). READMIT_ACCEPTANCE_SCALE=full runs the complete tuning
grids and the full-size tuned models; the default desk scale runs shrunk
grids and checks the trends instead.
"""
from __future__ import annotations

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from readmit.balance import BalanceConfig, balance, verify_convexity
from readmit.cli import main
from readmit.evaluate import cross_validate, make_folds
from readmit.features import read_matrix
from readmit.learners import LearnerSpec
from readmit.seeding import derive_seed
from readmit.stats import DEFAULT_CRITICAL_WINS, sign_test
from readmit.tuning import ParamGrid, grid_search

from reference_values import FOLDS

ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = Path(os.environ.get("READMIT_DATA_DIR", ROOT / "data"))
DATA = DATA_DIR / "diabetic_data.csv"
IDS = DATA_DIR / "IDS_mapping.csv"
FULL = os.environ.get("READMIT_ACCEPTANCE_SCALE", "desk") == "full"
SEED = 0

CLEAN_COUNTS = {"NO": 52337, ">30": 34649, "<30": 11066}
BALANCED = 34649
BASELINE = {  # accuracy % on the 80/20 split of the balanced set, meds included
    "gradient_boosting": 64.16, "random_forest": 61.54, "decision_tree": 60.17,
    "svm": 53.50, "logistic_regression": 45.46, "naive_bayes": 39.10,
}
TUNED_GB = {"learning_rate": 0.1, "max_depth": 5, "n_estimators": 150}
TUNED_RF = {"max_depth": 20, "min_samples_split": 4, "n_estimators": 500}

RESULTS: list[str] = []


def report(capsys, criterion: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS.append(line)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def require_data(capsys, criterion: str) -> None:
    if not (DATA.exists() and IDS.exists()):
        report(capsys, criterion, False,
               f"public dataset not found ({DATA}, {IDS}); set READMIT_DATA_DIR")


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def _stage(run_dir, *args):
    rc = main(list(args) + ["--out", str(run_dir), "--seed", str(SEED)])
    assert rc == 0, f"stage {args[0]} failed"
    return json.loads((run_dir / args[0] / "manifest.json").read_text())


# ------------------------------------------------------------------ 1

def test_criterion_1_golden_cleaning(run_dir, capsys):
    require_data(capsys, "1 cleaning counts")
    t0 = time.perf_counter()
    man = _stage(run_dir, "prepare", "--data", str(DATA), "--ids", str(IDS))
    elapsed = time.perf_counter() - t0
    got = {k: man["clean"]["class_counts"][k] for k in CLEAN_COUNTS}
    ok = got == CLEAN_COUNTS and elapsed < 60
    detail = f"counts {got} (expected {CLEAN_COUNTS}), {elapsed:.1f}s"
    if got != CLEAN_COUNTS:
        detail += f"; rule drops {man['clean']['rule_drops']}"
    report(capsys, "1 cleaning counts", ok, detail)


# ------------------------------------------------------------------ 2

def test_criterion_2_balance(run_dir, capsys):
    require_data(capsys, "2 balance")
    if not (run_dir / "prepare" / "manifest.json").exists():
        _stage(run_dir, "prepare", "--data", str(DATA), "--ids", str(IDS))
    t0 = time.perf_counter()
    man = _stage(run_dir, "balance")
    elapsed = time.perf_counter() - t0
    counts = list(man["output_counts"].values())
    ok = counts == [BALANCED] * 3 and man["convexity_failures"] == 0 and elapsed < 600
    report(capsys, "2 balance", ok,
           f"counts {counts}, convexity failures {man['convexity_failures']}, {elapsed:.1f}s")


def _ensure_balanced(run_dir):
    if not (run_dir / "balance" / "manifest.json").exists():
        _stage(run_dir, "prepare", "--data", str(DATA), "--ids", str(IDS))
        _stage(run_dir, "balance")


def _baseline(run_dir):
    if not (run_dir / "baseline" / "manifest.json").exists():
        _ensure_balanced(run_dir)
        _stage(run_dir, "baseline", "--ablation")
    return json.loads((run_dir / "baseline" / "manifest.json").read_text())["reports"]


# ------------------------------------------------------------------ 3

def test_criterion_3_baseline(run_dir, capsys):
    require_data(capsys, "3 baseline accuracy")
    reports = _baseline(run_dir)
    parts, ok = [], True
    for fam, target in BASELINE.items():
        acc = 100 * reports[f"with_meds/{fam}"]["accuracy"]
        hit = abs(acc - target) <= 3.0
        if not hit and fam != "svm":  # an SVM miss is reported, not failed
            ok = False
        parts.append(f"{fam} {acc:.2f} vs {target:.2f} {'ok' if hit else 'MISS'}")
    report(capsys, "3 baseline accuracy", ok, "; ".join(parts))


# ------------------------------------------------------------------ 4

def test_criterion_4_medication_ablation(run_dir, capsys):
    require_data(capsys, "4 medication ablation")
    reports = _baseline(run_dir)
    rec = {k: 100 * v["macro_recall"] for k, v in reports.items()}
    nb_gap = rec["without_meds/naive_bayes"] - rec["with_meds/naive_bayes"]
    others = {f: abs(rec[f"with_meds/{f}"] - rec[f"without_meds/{f}"])
              for f in BASELINE if f != "naive_bayes"}
    ok = nb_gap >= 4.0 and all(d < 3.0 for d in others.values())
    report(capsys, "4 medication ablation", ok,
           f"NB recall gap {nb_gap:.2f} (need >= 4); others "
           + ", ".join(f"{f} {d:.2f}" for f, d in others.items()) + " (need < 3)")


# ------------------------------------------------------------------ 5

def _cv_accuracy(m, family, params, plan, tag):
    spec = LearnerSpec(family, params, derive_seed(SEED, "acceptance", tag))
    return cross_validate(spec, m, plan)[1]["accuracy"]


def test_criterion_5_tuning_effects(run_dir, capsys):
    require_data(capsys, "5 tuning effects")
    _ensure_balanced(run_dir)
    m, _ = read_matrix(run_dir / "balance" / "balanced.csv")
    plan = make_folds(m.y, 5, derive_seed(SEED, "tune-folds"))
    parts, ok = [], True

    svm_lo = _cv_accuracy(m, "svm", {"C": 0.1}, plan, "svm-lo")
    svm_hi = _cv_accuracy(m, "svm", {"C": 100.0}, plan, "svm-hi")
    gain = 100 * (svm_hi - svm_lo)
    ok &= gain >= 4.0
    parts.append(f"SVM C=100 minus C=0.1 {gain:.2f} pts (need >= 4)")

    if FULL:
        rf_default = _cv_accuracy(m, "random_forest", {}, plan, "rf-default")
        rf = grid_search(ParamGrid("random_forest", {
            "n_estimators": [100, 200, 500], "max_depth": [6, 10, 20],
            "min_samples_split": [2, 3, 4], "max_features": [5, 61, "auto"]}), m, plan=plan, seed=SEED)
        rf_gain = 100 * (rf.ranked()[0].mean_accuracy - rf_default)
        gb = grid_search(ParamGrid("gradient_boosting", {
            "learning_rate": [1.0, 0.5, 0.1], "n_estimators": [50, 100, 150],
            "max_depth": [1, 2, 3, 4, 5, 6]}), m, plan=plan, seed=SEED)
        gb_best = 100 * gb.ranked()[0].mean_accuracy
        ok &= rf_gain >= 1.0 and abs(gb_best - 64.77) <= 2.0
        parts.append(f"tuned RF minus default {rf_gain:.2f} pts (need >= 1)")
        parts.append(f"tuned GB {gb_best:.2f} (need 64.77 +/- 2)")
    else:
        rf = grid_search(ParamGrid("random_forest", {
            "n_estimators": [20], "max_depth": [6, 10, 20], "min_samples_split": [2],
            "max_features": ["auto"]}), m, plan=plan, seed=SEED)
        by_depth = [r.mean_accuracy for r in sorted(rf.rows, key=lambda r: r.params["max_depth"])]
        rf_trend = all(b > a for a, b in zip(by_depth, by_depth[1:]))
        gb = grid_search(ParamGrid("gradient_boosting", {
            "learning_rate": [1.0, 0.5, 0.1], "n_estimators": [50], "max_depth": [1, 3, 5]}),
            m, plan=plan, seed=SEED)
        bottom = gb.ranked()[-1].params
        gb_trend = bottom["learning_rate"] == 0.1 and bottom["max_depth"] == 1
        ok &= rf_trend and gb_trend
        parts.append("RF accuracy by max_depth 6/10/20: "
                     + "/".join(f"{100 * a:.2f}" for a in by_depth)
                     + (" rising" if rf_trend else " NOT rising"))
        parts.append(f"GB lowest-ranked config {bottom} (need lr 0.1, depth 1)")
    report(capsys, "5 tuning effects", ok, "; ".join(parts))


# ------------------------------------------------------------------ 6

def test_criterion_6b_published_fold_recount(capsys):
    r = sign_test(FOLDS["gb"]["accuracy"], FOLDS["rf"]["accuracy"],
                  critical_table=DEFAULT_CRITICAL_WINS)
    ok = (r.wins_a, r.wins_b) == (5, 5) and r.decision == "fail_to_reject"
    report(capsys, "6b published-fold recount", ok,
           f"wins {r.wins_a} vs {r.wins_b}, ties {r.ties}, p={r.p_value_two_sided:.4f}, {r.decision}")


def test_criterion_6a_tuned_models_sign_test(run_dir, capsys):
    require_data(capsys, "6a tuned GB vs RF sign test")
    _ensure_balanced(run_dir)
    rf_params = dict(TUNED_RF) if FULL else dict(TUNED_RF, n_estimators=100)
    man = _stage(run_dir, "compare", "--model-a", "gradient_boosting", "--model-b", "random_forest",
                 "--params-a", json.dumps(TUNED_GB), "--params-b", json.dumps(rf_params))
    st = man["sign_test"]
    ok = st["decision"] == "fail_to_reject"
    report(capsys, "6a tuned GB vs RF sign test", ok,
           f"wins {st['wins_a']} vs {st['wins_b']}, ties {st['ties']}, "
           f"p={st['p_value_two_sided']:.4f}, {st['decision']}")


# ------------------------------------------------------------------ 7

PROPERTY_SUITES = [
    "tests/test_evaluate.py::test_micro_identity",
    "tests/test_learners.py::test_lr_gradient_matches_finite_differences",
    "tests/test_learners.py::test_gb_deviance_non_increasing",
    "tests/test_learners.py::test_rf_single_tree_equals_dt",
    "tests/test_learners.py::test_dt_root_split_matches_oracle",
    "tests/test_stats.py::test_p_value_matches_enumeration",
    "tests/test_stats.py::test_quartiles_match_oracle",
    "tests/test_balance.py::test_smote_convexity_property",
    "tests/test_cli.py::test_byte_determinism",
]


def test_criterion_7_property_suites(capsys):
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider"]
                         + PROPERTY_SUITES, cwd=ROOT, capture_output=True, text=True)
    tail = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    report(capsys, "7 property suites", res.returncode == 0, f"{len(PROPERTY_SUITES)} suites: {tail}")
