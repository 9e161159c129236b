"""Encoding plan and design-matrix construction for the cleaned table."""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ingest import LABEL_COLUMN, RawTable, SchemaError

LABELS = {"NO": 0, ">30": 1, "<30": 2}
LABEL_NAMES = ("NO", ">30", "<30")
N_CLASSES = 3

# Non-insulin medication columns of the public file, in file order.
MEDICATIONS = (
    "metformin", "repaglinide", "nateglinide", "chlorpropamide", "glimepiride",
    "acetohexamide", "glipizide", "glyburide", "tolbutamide", "pioglitazone",
    "rosiglitazone", "acarbose", "miglitol", "troglitazone", "tolazamide",
    "examide", "citoglipton", "glyburide-metformin", "glipizide-metformin",
    "glimepiride-pioglitazone", "metformin-rosiglitazone", "metformin-pioglitazone",
)
MEDICATION_MAP = {"Up": 1.0, "Down": -1.0, "Steady": 0.0, "No": -2.0}
GLUCOSE_MAP = {"None": 0.0, "Norm": 100.0, ">200": 200.0, ">300": 300.0}
A1C_MAP = {"None": 0.0, "Norm": 5.0, ">7": 7.0, ">8": 8.0}

COUNT_FEATURES = (
    "time_in_hospital", "num_lab_procedures", "num_procedures", "num_medications",
    "number_outpatient", "number_emergency", "number_inpatient", "number_diagnoses",
)

# Id groupings read off the IDS_mapping descriptions.
EMERGENCY_ADMISSION = frozenset({"1"})
DISCHARGE_GROUPS = {
    "home": frozenset({"1", "6", "8", "13"}),
    "transfer": frozenset({
        "2", "3", "4", "5", "9", "10", "14", "15", "16", "17", "22", "23", "24",
        "27", "28", "29", "30",
    }),
}
SOURCE_GROUPS = {
    "emergency_room": frozenset({"7"}),
    "transfer": frozenset({"4", "5", "6", "10", "18", "22", "25", "26"}),
}

ICD9_RANGES = (
    ("diabetes", ((250, 251),)),
    ("circulatory", ((390, 458), (785, 785))),
    ("respiratory", ((460, 519), (786, 786))),
    ("digestive", ((520, 579), (787, 787))),
    ("genitourinary", ((580, 629), (788, 788))),
    ("injury", ((800, 999),)),
    ("musculoskeletal", ((710, 739),)),
    ("neoplasms", ((140, 239),)),
)
DIAGNOSIS_GROUPS = tuple(g for g, _ in ICD9_RANGES) + ("other",)

_AGE_RE = re.compile(r"^\[(\d+)-(\d+)\)$")


class EncodingError(ValueError):
    pass


def group_icd9(code: str) -> str:
    """Map an ICD-9 code string to one of the nine diagnosis groups.

    The integer part before the first ``.`` is tested against the group
    ranges (bounds inclusive); V/E codes and anything unparsable go to
    ``other``. ``250.83`` falls in 250..251, so the integer part is enough.
    """
    if code is None or not str(code).strip():
        raise EncodingError("empty ICD-9 code")
    head = str(code).strip().split(".", 1)[0]
    if not head.isdigit():
        return "other"
    value = int(head)
    for group, spans in ICD9_RANGES:
        for lo, hi in spans:
            if lo <= value <= hi:
                return group
    return "other"


def encode_age(range_text: str) -> float:
    m = _AGE_RE.match(range_text or "")
    if not m:
        raise EncodingError(f"unrecognized age range {range_text!r}")
    lo, hi = int(m.group(1)), int(m.group(2))
    if hi - lo != 10 or lo % 10 or not 0 <= lo <= 90:
        raise EncodingError(f"unrecognized age range {range_text!r}")
    return (lo + hi) / 2


def encode_ordinal_tests(value: str, feature: str) -> float:
    table = {"glucose": GLUCOSE_MAP, "a1c": A1C_MAP}.get(feature)
    if table is None:
        raise EncodingError(f"unknown test feature {feature!r}")
    try:
        return table[value]
    except KeyError:
        raise EncodingError(f"{feature}: value {value!r} outside {sorted(table)}") from None


# ------------------------------------------------------------------ the plan

RULE_KINDS = (
    "one_hot", "binary", "ordinal", "interval_median", "icd9_group_then_one_hot",
    "passthrough_numeric", "drop",
)


@dataclass(frozen=True)
class Rule:
    kind: str
    # one_hot: optional value -> category grouping, "other" for unlisted values
    groups: dict | None = None
    # binary: values counted as 1; everything else is 0 unless ``negative`` is set
    positive: frozenset | None = None
    negative: frozenset | None = None
    mapping: dict | None = None

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.groups is not None:
            out["groups"] = {k: sorted(v) for k, v in self.groups.items()}
        if self.positive is not None:
            out["positive"] = sorted(self.positive)
        if self.negative is not None:
            out["negative"] = sorted(self.negative)
        if self.mapping is not None:
            out["mapping"] = dict(self.mapping)
        return out


@dataclass(frozen=True)
class EncodingPlan:
    rules: dict[str, Rule]
    include_meds: bool

    def describe(self) -> dict:
        return {
            "include_meds": self.include_meds,
            "rules": {c: r.describe() for c, r in self.rules.items()},
        }


def default_plan(include_meds: bool = True) -> EncodingPlan:
    rules = {
        "race": Rule("one_hot"),
        "gender": Rule("binary", positive=frozenset({"Male"}), negative=frozenset({"Female"})),
        "age": Rule("interval_median"),
        "admission_type_id": Rule("binary", positive=EMERGENCY_ADMISSION),
        "discharge_disposition_id": Rule("one_hot", groups=DISCHARGE_GROUPS),
        "admission_source_id": Rule("one_hot", groups=SOURCE_GROUPS),
    }
    for name in COUNT_FEATURES:
        rules[name] = Rule("passthrough_numeric")
    for name in ("diag_1", "diag_2", "diag_3"):
        rules[name] = Rule("icd9_group_then_one_hot")
    rules["max_glu_serum"] = Rule("ordinal", mapping=GLUCOSE_MAP)
    rules["A1Cresult"] = Rule("ordinal", mapping=A1C_MAP)
    for name in MEDICATIONS:
        rules[name] = Rule("ordinal", mapping=MEDICATION_MAP) if include_meds else Rule("drop")
    rules["insulin"] = Rule("one_hot")
    rules["change"] = Rule("binary", positive=frozenset({"Ch"}), negative=frozenset({"No"}))
    rules["diabetesMed"] = Rule("binary", positive=frozenset({"Yes"}), negative=frozenset({"No"}))
    return EncodingPlan(rules, include_meds)


# ----------------------------------------------------------- the matrix

@dataclass(frozen=True)
class FeatureMatrix:
    names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != len(self.names):
            raise ValueError(f"X shape {self.X.shape} does not match {len(self.names)} names")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("label vector length differs from row count")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureMatrix(self.names, self.X[idx], self.y[idx])

    def drop_features(self, names) -> "FeatureMatrix":
        names = set(names)
        keep = [i for i, n in enumerate(self.names) if n not in names]
        return FeatureMatrix(tuple(self.names[i] for i in keep),
                             np.ascontiguousarray(self.X[:, keep]), self.y)

    def class_counts(self) -> list[int]:
        return np.bincount(self.y, minlength=N_CLASSES).tolist()


def _first_seen(values) -> list:
    return list(dict.fromkeys(values))


def _group_value(value: str, groups: dict) -> str:
    for name, members in groups.items():
        if value in members:
            return name
    return "other"


def _encode_column(name, col, rule: Rule):
    """Return (feature names, list of column arrays, category order or None)."""
    if rule.kind == "drop":
        return [], [], None
    if any(v is None for v in col):
        raise EncodingError(f"{name}: missing values reach the encoder; clean first")
    if rule.kind == "passthrough_numeric":
        try:
            arr = np.array([float(v) for v in col], dtype=np.float64)
        except ValueError as exc:
            raise EncodingError(f"{name}: {exc}") from None
        return [name], [arr], None
    if rule.kind == "interval_median":
        cache = {}
        arr = np.empty(len(col))
        for i, v in enumerate(col):
            if v not in cache:
                cache[v] = encode_age(v)
            arr[i] = cache[v]
        return [name], [arr], None
    if rule.kind == "ordinal":
        arr = np.empty(len(col))
        for i, v in enumerate(col):
            try:
                arr[i] = rule.mapping[v]
            except KeyError:
                raise EncodingError(f"{name}: value {v!r} absent from ordinal map") from None
        return [name], [arr], None
    if rule.kind == "binary":
        if rule.negative is not None:
            bad = set(col) - rule.positive - rule.negative
            if bad:
                raise EncodingError(f"{name}: unexpected value(s) {sorted(bad)}")
        arr = np.fromiter((v in rule.positive for v in col), dtype=np.float64, count=len(col))
        label = "_".join(sorted(rule.positive))
        return [f"{name}={label}"], [arr], None
    if rule.kind in ("one_hot", "icd9_group_then_one_hot"):
        if rule.kind == "icd9_group_then_one_hot":
            cache = {}
            cats = []
            for v in col:
                g = cache.get(v)
                if g is None:
                    g = cache[v] = group_icd9(v)
                cats.append(g)
        elif rule.groups is not None:
            cats = [_group_value(v, rule.groups) for v in col]
        else:
            cats = list(col)
        order = _first_seen(cats)
        index = {c: j for j, c in enumerate(order)}
        block = np.zeros((len(cats), len(order)))
        block[np.arange(len(cats)), [index[c] for c in cats]] = 1.0
        return [f"{name}={c}" for c in order], list(block.T), order
    raise AssertionError(rule.kind)


@dataclass
class MatrixManifest:
    plan: dict
    feature_count: int
    feature_names: list
    category_orders: dict
    class_counts: dict

    def as_dict(self):
        return {
            "plan": self.plan,
            "feature_count": self.feature_count,
            "feature_names": self.feature_names,
            "category_orders": self.category_orders,
            "class_counts": self.class_counts,
            "discharge_groups": {k: sorted(v, key=int) for k, v in DISCHARGE_GROUPS.items()},
            "admission_source_groups": {k: sorted(v, key=int) for k, v in SOURCE_GROUPS.items()},
            "emergency_admission_ids": sorted(EMERGENCY_ADMISSION, key=int),
        }


def build_matrix_with_manifest(table: RawTable, plan: EncodingPlan):
    retained = [n for n in table.names if n != LABEL_COLUMN]
    missing = [n for n in retained if n not in plan.rules]
    if missing:
        raise SchemaError(f"no encoding rule for column(s) {missing}")
    absent = [n for n in plan.rules if n not in table.names]
    if absent:
        raise SchemaError(f"plan column(s) absent from table: {absent}")

    names, cols, orders = [], [], {}
    for name in retained:
        fnames, fcols, order = _encode_column(name, table.column(name), plan.rules[name])
        names.extend(fnames)
        cols.extend(fcols)
        if order is not None:
            orders[name] = order

    labels = table.column(LABEL_COLUMN)
    try:
        y = np.array([LABELS[v] for v in labels], dtype=np.int64)
    except KeyError as exc:
        raise EncodingError(f"{LABEL_COLUMN}: unknown label {exc.args[0]!r}") from None
    n = table.n_rows
    X = np.column_stack(cols) if cols else np.zeros((n, 0))
    X = np.ascontiguousarray(X, dtype=np.float64).reshape(n, len(names))
    m = FeatureMatrix(tuple(names), X, y)
    manifest = MatrixManifest(
        plan=plan.describe(),
        feature_count=len(names),
        feature_names=list(names),
        category_orders=orders,
        class_counts=dict(zip(LABEL_NAMES, m.class_counts())),
    )
    return m, manifest


def build_matrix(table: RawTable, plan: EncodingPlan) -> FeatureMatrix:
    return build_matrix_with_manifest(table, plan)[0]


def medication_columns(names) -> list[str]:
    """Feature names produced by the non-insulin medication rules."""
    meds = set(MEDICATIONS)
    return [n for n in names if n in meds]


# ------------------------------------------------------------------ CSV I/O

def _fmt(x: float) -> str:
    return repr(float(x))


def write_matrix(m: FeatureMatrix, path, provenance=None) -> None:
    header = list(m.names) + ["label"]
    if provenance is not None:
        header.append("provenance")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(m.n):
            row = [_fmt(v) for v in m.X[i]] + [str(int(m.y[i]))]
            if provenance is not None:
                row.append("synthetic" if provenance[i] else "original")
            writer.writerow(row)


def read_matrix(path):
    """Read a matrix CSV; returns (FeatureMatrix, provenance mask or None)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        has_prov = header[-1] == "provenance"
        n_feat = len(header) - (2 if has_prov else 1)
        if header[n_feat] != "label":
            raise SchemaError(f"{path}: expected 'label' column after features")
        X, y, prov = [], [], []
        for row in reader:
            X.append([float(v) for v in row[:n_feat]])
            y.append(int(row[n_feat]))
            if has_prov:
                prov.append(row[-1] == "synthetic")
    X = np.array(X, dtype=np.float64).reshape(len(y), n_feat)
    m = FeatureMatrix(tuple(header[:n_feat]), X, np.array(y, dtype=np.int64))
    return m, (np.array(prov, dtype=bool) if has_prov else None)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        f = float(o)
        return f if math.isfinite(f) else str(f)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
