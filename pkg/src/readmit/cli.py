"""Command-line pipeline: prepare -> balance -> baseline / tune -> compare.

Every stage writes into ``<out>/<stage>/``: data as CSV, a deterministic
``manifest.json`` and a ``volatile.json`` holding wall times and
timestamps. Later stages read earlier stages' outputs from the same
``--out`` directory and refuse to start if that stage's manifest is absent.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .balance import BalanceConfig, balance, verify_convexity
from .evaluate import cross_validate, evaluate, make_folds, split
from .features import (
    LABEL_NAMES, MEDICATIONS, build_matrix_with_manifest, default_plan, medication_columns,
    read_matrix, write_json, write_matrix,
)
from .ingest import clean_with_log, load_id_mappings, load_raw, missing_profile, write_missing_profile, write_raw
from .learners import FAMILIES, LearnerSpec, save_model
from .seeding import derive_seed
from .stats import DEFAULT_CRITICAL_WINS, boxplot_summary, outlier_attribution, sign_test
from .tuning import NoGridError, builtin_grid, grid_search, load_grids, significance, summarize

log = logging.getLogger("readmit")

FAMILY_ORDER = ("naive_bayes", "gradient_boosting", "random_forest", "decision_tree",
                "logistic_regression", "svm")
TUNABLE = ("gradient_boosting", "random_forest", "decision_tree", "logistic_regression", "svm")
ALIASES = {"nb": "naive_bayes", "gb": "gradient_boosting", "rf": "random_forest",
           "dt": "decision_tree", "lr": "logistic_regression", "svm": "svm"}

DEFAULTS = {
    "seed": 0,
    "out": "runs/default",
    "data": None,
    "ids": None,
    "include_meds": True,
    "k_neighbors": 5,
    "target_per_class": "auto",
    "balance_scope": "full",
    "train_fraction": 0.8,
    "families": list(FAMILY_ORDER),
    "ablation": False,
    "save_models": False,
    "grid": None,
    "budget": None,
    "cv_folds": 5,
    "tune_scope": "full",
    "summary_n": 10,
    "model_a": "gradient_boosting",
    "model_b": "random_forest",
    "params_a": None,
    "params_b": None,
    "compare_folds": 10,
    "alpha": 0.05,
}


class StageError(RuntimeError):
    pass


# ------------------------------------------------------------------ helpers

def _family(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in FAMILIES:
        raise StageError(f"unknown model family {name!r}")
    return name


def _stage_dir(cfg, stage: str) -> Path:
    d = Path(cfg["out"]) / stage
    d.mkdir(parents=True, exist_ok=True)
    return d


def _require_stage(cfg, stage: str) -> Path:
    d = Path(cfg["out"]) / stage
    if not (d / "manifest.json").exists():
        raise StageError(f"stage {stage!r} has not completed in {cfg['out']}; run it first")
    return d


def _write_manifest(d: Path, cfg, payload: dict, volatile: dict) -> None:
    doc = {"seed": cfg["seed"], "config": _echo(cfg), "version": __version__}
    doc.update(payload)
    write_json(doc, d / "manifest.json")
    volatile = dict(volatile)
    volatile["finished_utc"] = datetime.now(timezone.utc).isoformat()
    write_json(volatile, d / "volatile.json")
    _write_run_report(Path(cfg["out"]))


STAGES = ("prepare", "balance", "baseline", "tune", "compare")


def _write_run_report(out: Path) -> None:
    """Gather every completed stage's manifest (and, separately, its
    volatile section) into one run-level report."""
    report, volatile = {}, {}
    for stage in STAGES:
        m = out / stage / "manifest.json"
        if m.exists():
            report[stage] = json.loads(m.read_text())
            v = out / stage / "volatile.json"
            if v.exists():
                volatile[stage] = json.loads(v.read_text())
    write_json(report, out / "run_report.json")
    write_json(volatile, out / "run_volatile.json")


def _echo(cfg) -> dict:
    return {k: cfg[k] for k in sorted(cfg) if k not in ("config", "command", "func", "verbose", "out")}


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "None"
    return str(v)


def _write_confusion(path: Path, cm) -> None:
    header = ["true\\pred"] + list(LABEL_NAMES)
    _write_rows(path, header, [[LABEL_NAMES[i]] + [str(c) for c in row] for i, row in enumerate(cm)])


def _load_balanced(cfg):
    d = _require_stage(cfg, "balance")
    m, prov = read_matrix(d / "balanced.csv")
    return m, prov


def _load_prepared(cfg):
    d = _require_stage(cfg, "prepare")
    m, _ = read_matrix(d / "matrix.csv")
    return m


def _balance_cfg(cfg) -> BalanceConfig:
    target = cfg["target_per_class"]
    if target != "auto":
        target = int(target)
    return BalanceConfig(derive_seed(cfg["seed"], "balance"), int(cfg["k_neighbors"]), target)


# ------------------------------------------------------------------- stages

def cmd_prepare(cfg) -> int:
    if not cfg["data"]:
        raise StageError("--data is required")
    d = _stage_dir(cfg, "prepare")
    t0 = time.perf_counter()
    raw = load_raw(cfg["data"])
    profile = missing_profile(raw)
    write_missing_profile(profile, d / "missing_profile.csv")
    cleaned, clog = clean_with_log(raw)
    write_raw(cleaned, d / "cleaned.csv")
    plan = default_plan(bool(cfg["include_meds"]))
    m, manifest = build_matrix_with_manifest(cleaned, plan)
    write_matrix(m, d / "matrix.csv")
    payload = {
        "raw_rows": raw.n_rows,
        "raw_columns": len(raw.names),
        "clean": clog.as_dict(),
        "features": manifest.as_dict(),
    }
    if cfg["ids"]:
        ids = load_id_mappings(cfg["ids"])
        payload["id_descriptions"] = {
            "admission_type": {str(k): v for k, v in sorted(ids.admission_type.items())},
            "discharge_disposition": {str(k): v for k, v in sorted(ids.discharge_disposition.items())},
            "admission_source": {str(k): v for k, v in sorted(ids.admission_source.items())},
        }
    _write_manifest(d, cfg, payload, {"wall_time_s": time.perf_counter() - t0})
    print(f"prepare: {raw.n_rows} raw rows, {clog.rows_out} kept, classes {clog.class_counts}, "
          f"{manifest.feature_count} features")
    return 0


def cmd_balance(cfg) -> int:
    m = _load_prepared(cfg)
    d = _stage_dir(cfg, "balance")
    t0 = time.perf_counter()
    bcfg = _balance_cfg(cfg)
    bd = balance(m, bcfg)
    bad = verify_convexity(bd)
    if bad:
        raise StageError(f"{len(bad)} synthetic rows fail the convexity check")
    write_matrix(bd.matrix, d / "balanced.csv", provenance=bd.synthetic)
    syn_rows = np.flatnonzero(bd.synthetic)
    _write_rows(d / "synthetic_parents.csv", ["row", "parent_a", "parent_b", "gap"],
                [[int(r), int(a), int(b), repr(float(u))]
                 for r, (a, b), u in zip(syn_rows, bd.parents, bd.gaps)])
    payload = {
        "input_counts": dict(zip(LABEL_NAMES, m.class_counts())),
        "output_counts": dict(zip(LABEL_NAMES, bd.matrix.class_counts())),
        "synthetic_rows": int(bd.synthetic.sum()),
        "convexity_failures": 0,
        "balance": {"seed": bcfg.seed, "k_neighbors": bcfg.k_neighbors,
                    "target_per_class": bcfg.target_per_class},
    }
    _write_manifest(d, cfg, payload, {"wall_time_s": time.perf_counter() - t0})
    print(f"balance: {payload['input_counts']} -> {payload['output_counts']}")
    return 0


def _baseline_data(cfg):
    """(train, test) for the baseline split under the configured balance scope."""
    split_seed = derive_seed(cfg["seed"], "baseline-split")
    if cfg["balance_scope"] == "train-only":
        m = _load_prepared(cfg)
        train, test = split(m, cfg["train_fraction"], split_seed)
        return balance(train, _balance_cfg(cfg)).matrix, test
    m, _ = _load_balanced(cfg)
    return split(m, cfg["train_fraction"], split_seed)


def cmd_baseline(cfg) -> int:
    train, test = _baseline_data(cfg)
    d = _stage_dir(cfg, "baseline")
    variants = [("with_meds", None)]
    if cfg["ablation"]:
        meds = medication_columns(train.names)
        if not meds:
            raise StageError("no medication columns to remove; prepare with --include-meds")
        variants.append(("without_meds", meds))
    families = _families(cfg)
    rows, micro_rows, reports, times = [], [], {}, {}
    for variant, drop in variants:
        tr = train.drop_features(drop) if drop else train
        te = test.drop_features(drop) if drop else test
        for fam in families:
            spec = LearnerSpec(fam, {}, derive_seed(cfg["seed"], "baseline", fam))
            log.info("baseline %s %s", variant, fam)
            rep, model = evaluate(spec, tr, te)
            rows.append([variant, fam, repr(rep.macro_recall), repr(rep.macro_precision),
                         repr(rep.macro_f1), repr(rep.accuracy)])
            micro_rows.append([variant, fam, repr(rep.micro_f1), repr(rep.micro_precision),
                               repr(rep.micro_recall)])
            _write_confusion(d / f"confusion_{variant}_{fam}.csv", rep.confusion)
            reports[f"{variant}/{fam}"] = rep.as_dict()
            times[f"{variant}/{fam}"] = model.wall_time_s
            if cfg["save_models"]:
                (d / "models").mkdir(exist_ok=True)
                save_model(model, d / "models" / f"{variant}_{fam}.json")
    _write_rows(d / "baseline.csv",
                ["variant", "model", "recall_macro", "precision_macro", "f1_macro", "accuracy"], rows)
    _write_rows(d / "micro.csv", ["variant", "model", "f1_micro", "precision_micro", "recall_micro"],
                micro_rows)
    payload = {
        "train_rows": train.n, "test_rows": test.n,
        "train_counts": dict(zip(LABEL_NAMES, train.class_counts())),
        "test_counts": dict(zip(LABEL_NAMES, test.class_counts())),
        "variants": {v: (len(train.names) - len(dr) if dr else len(train.names)) for v, dr in variants},
        "algorithms": {f: FAMILIES[f].algorithm for f in families},
        "reports": reports,
    }
    _write_manifest(d, cfg, payload, {"training_time_s": times})
    for r in rows:
        print(f"baseline: {r[0]:<13} {r[1]:<20} accuracy={float(r[5]):.4f}")
    return 0


def _tune_matrix(cfg):
    m, _ = _load_balanced(cfg)
    if cfg["tune_scope"] == "train-only":
        m, _ = split(m, cfg["train_fraction"], derive_seed(cfg["seed"], "baseline-split"))
    return m


def _families(cfg):
    """Requested families, deduplicated, in the fixed report order."""
    fams = cfg["families"]
    if fams == ["all"]:
        fams = FAMILY_ORDER
    chosen = {_family(f) for f in fams}
    return [f for f in FAMILY_ORDER if f in chosen]


def cmd_tune(cfg) -> int:
    m = _tune_matrix(cfg)
    d = _stage_dir(cfg, "tune")
    overrides = load_grids(cfg["grid"]) if cfg["grid"] else {}
    plan = make_folds(m.y, int(cfg["cv_folds"]), derive_seed(cfg["seed"], "tune-folds"))
    table20, results, times, best = [], {}, {}, {}
    for fam in _families(cfg):
        default_spec = LearnerSpec(fam, {}, derive_seed(cfg["seed"], "tune-default", fam))
        t0 = time.perf_counter()
        _, default_mean = cross_validate(default_spec, m, plan)
        before = default_mean["accuracy"]
        try:
            grid = overrides.get(fam) or builtin_grid(fam)
        except NoGridError as exc:
            print(f"tune: {fam}: {exc}")
            table20.append([fam, repr(before), "N/A", "N/A"])
            results[fam] = {"before": before, "grid": None, "note": str(exc)}
            times[fam] = time.perf_counter() - t0
            continue
        res = grid_search(grid, m, seed=derive_seed(cfg["seed"], "tune", fam),
                          budget=cfg["budget"], plan=plan)
        times[fam] = time.perf_counter() - t0
        names = list(grid.axes)
        _write_rows(
            d / f"{fam}_grid.csv",
            ["index"] + names + [f"fold_{i + 1}" for i in range(plan.k)] + ["mean_accuracy", "rank"],
            [[r.index] + [_fmt(r.params[n]) for n in names] + [repr(a) for a in r.fold_accuracies]
             + [repr(r.mean_accuracy), r.rank] for r in res.ranked()],
        )
        n_sum = min(int(cfg["summary_n"]), len(res.rows) // 2)
        summary = summarize(res, n_sum) if n_sum >= 1 else {}
        box = boxplot_summary([(r.mean_accuracy, r.params) for r in res.rows]) if len(res.rows) >= 4 else None
        if box is not None:
            outlier_set = {id(p) for _, p in box.outliers}
            _write_rows(d / f"{fam}_boxplot.csv", ["score", "rank", "params", "is_outlier"],
                        [[repr(r.mean_accuracy), r.rank, json.dumps(r.params, sort_keys=True),
                          int(id(r.params) in outlier_set)] for r in res.ranked()])
        after = res.ranked()[0].mean_accuracy
        best[fam] = res.best
        table20.append([fam, repr(before), repr(after), significance(before, after)])
        results[fam] = {
            "grid_size": res.grid_size,
            "evaluated": len(res.rows),
            "fits": len(res.rows) * plan.k,
            "best_params": res.best,
            "before": before,
            "after": after,
            "summary_n": n_sum,
            "summary": summary,
            "boxplot": box.as_dict() if box else None,
            "outlier_attribution": outlier_attribution(box) if box else {},
        }
        print(f"tune: {fam}: {len(res.rows)}/{res.grid_size} configs, best {res.best} "
              f"-> {after:.4f} (default {before:.4f})")
    _write_rows(d / "table20.csv", ["model", "before", "after", "result"], table20)
    write_json(best, d / "best_params.json")
    _write_manifest(d, cfg, {"folds": plan.k, "rows": m.n, "results": results},
                    {"wall_time_s": times})
    return 0


def _compare_params(cfg, which: str, fam: str) -> dict:
    given = cfg[f"params_{which}"]
    if given:
        return json.loads(given) if isinstance(given, str) else dict(given)
    best_file = Path(cfg["out"]) / "tune" / "best_params.json"
    if best_file.exists():
        best = json.loads(best_file.read_text())
        if fam in best:
            return best[fam]
    return {}


COMPARE_METRICS = (("accuracy", "accuracy"), ("recall", "macro_recall"),
                   ("precision", "macro_precision"), ("f1", "macro_f1"))


def cmd_compare(cfg) -> int:
    m, _ = _load_balanced(cfg)
    d = _stage_dir(cfg, "compare")
    fa, fb = _family(cfg["model_a"]), _family(cfg["model_b"])
    pa, pb = _compare_params(cfg, "a", fa), _compare_params(cfg, "b", fb)
    plan = make_folds(m.y, int(cfg["compare_folds"]), derive_seed(cfg["seed"], "compare-folds"))
    # seeds follow the model, not its slot, so a model compared with itself ties
    sa = LearnerSpec(fa, pa, derive_seed(cfg["seed"], "compare", fa, json.dumps(pa, sort_keys=True)))
    sb = LearnerSpec(fb, pb, derive_seed(cfg["seed"], "compare", fb, json.dumps(pb, sort_keys=True)))
    t0 = time.perf_counter()
    ra, _ = cross_validate(sa, m, plan)
    rb, _ = cross_validate(sb, m, plan)
    header = ["fold"] + [f"a_{n}" for n, _ in COMPARE_METRICS] + [f"b_{n}" for n, _ in COMPARE_METRICS]
    _write_rows(d / "folds.csv", header,
                [[f + 1] + [repr(getattr(x, k)) for _, k in COMPARE_METRICS]
                 + [repr(getattr(y, k)) for _, k in COMPARE_METRICS]
                 for f, (x, y) in enumerate(zip(ra, rb))])
    tests = {}
    for name, key in COMPARE_METRICS:
        res = sign_test([getattr(r, key) for r in ra], [getattr(r, key) for r in rb],
                        cfg["alpha"], DEFAULT_CRITICAL_WINS)
        tests[name] = res.as_dict()
    payload = {"model_a": {"family": fa, "params": pa}, "model_b": {"family": fb, "params": pb},
               "folds": plan.k, "sign_test": tests["accuracy"], "recounts": tests}
    _write_manifest(d, cfg, payload, {"wall_time_s": time.perf_counter() - t0})
    st = tests["accuracy"]
    print(f"compare: {fa} vs {fb}: wins {st['wins_a']}-{st['wins_b']} ties {st['ties']}, "
          f"p={st['p_value_two_sided']:.4g} -> {st['decision']}")
    return 0


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with flat keys; flags win on conflict")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--out", help="run directory (default runs/default)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="readmit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", parents=[common], help="clean and encode the raw CSV")
    s.add_argument("--data", help="diabetic_data.csv")
    s.add_argument("--ids", help="IDS_mapping.csv (descriptions echoed into the manifest)")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--include-meds", dest="include_meds", action="store_const", const=True)
    g.add_argument("--exclude-meds", dest="include_meds", action="store_const", const=False)
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("balance", parents=[common], help="undersample 'NO', SMOTE the rest")
    s.add_argument("--k-neighbors", type=int, dest="k_neighbors")
    s.add_argument("--target", dest="target_per_class", help="rows per class or 'auto'")
    s.set_defaults(func=cmd_balance)

    s = sub.add_parser("baseline", parents=[common], help="six default models on an 80/20 split")
    s.add_argument("--families", nargs="+")
    s.add_argument("--train-fraction", type=float, dest="train_fraction")
    s.add_argument("--balance-scope", choices=["full", "train-only"], dest="balance_scope")
    s.add_argument("--k-neighbors", type=int, dest="k_neighbors")
    s.add_argument("--target", dest="target_per_class")
    s.add_argument("--ablation", action="store_const", const=True,
                   help="also evaluate without the medication features")
    s.add_argument("--save-models", action="store_const", const=True, dest="save_models")
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("tune", parents=[common], help="grid search under k-fold CV")
    s.add_argument("--families", nargs="+", help="families to tune (default: all)")
    s.add_argument("--grid", help="JSON grid overrides {family: {param: [values]}}")
    s.add_argument("--budget", type=int, help="max configurations evaluated per family")
    s.add_argument("--folds", type=int, dest="cv_folds")
    s.add_argument("--tune-scope", choices=["full", "train-only"], dest="tune_scope")
    s.add_argument("--train-fraction", type=float, dest="train_fraction")
    s.add_argument("--summary-n", type=int, dest="summary_n")
    s.set_defaults(func=cmd_tune)

    s = sub.add_parser("compare", parents=[common], help="sign test of two models over k folds")
    s.add_argument("--model-a", dest="model_a")
    s.add_argument("--model-b", dest="model_b")
    s.add_argument("--params-a", dest="params_a", help="JSON params (default: tuned best or defaults)")
    s.add_argument("--params-b", dest="params_b")
    s.add_argument("--folds", type=int, dest="compare_folds")
    s.add_argument("--alpha", type=float)
    s.set_defaults(func=cmd_compare)
    return p


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise StageError(f"unknown config key(s): {sorted(unknown)}")
        cfg.update(file_cfg)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(cfg)
    except Exception as exc:  # noqa: BLE001 - every failure exits nonzero naming the stage
        print(f"readmit {args.command}: error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return 2


if __name__ == "__main__":
    sys.exit(main())
