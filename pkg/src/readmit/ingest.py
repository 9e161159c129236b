"""Parsing and cleaning of the UCI Diabetes 130-US hospitals files.

The raw table keeps every cell as text; the literal ``?`` is the only
missing marker and becomes ``None``.
"""
from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

MISSING_TOKEN = "?"
INVALID_TOKEN = "Unknown/Invalid"

HIGHLY_MISSING = ("weight", "payer_code", "medical_specialty")
IDENTIFIERS = ("encounter_id", "patient_nbr")
REQUIRED_PRESENT = ("race", "diag_1", "diag_2", "diag_3", "gender")
INVALID_FILTERED = ("race", "gender")
LABEL_COLUMN = "readmitted"


class ParseError(ValueError):
    pass


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class RawTable:
    names: tuple[str, ...]
    columns: tuple[tuple[str | None, ...], ...]

    def __post_init__(self):
        if len(self.names) != len(self.columns):
            raise ValueError("names and columns differ in length")
        lengths = {len(c) for c in self.columns}
        if len(lengths) > 1:
            raise ValueError(f"ragged columns: lengths {sorted(lengths)}")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    def column(self, name: str) -> tuple[str | None, ...]:
        try:
            return self.columns[self.names.index(name)]
        except ValueError:
            raise SchemaError(f"column {name!r} not in table") from None

    def rows(self):
        return zip(*self.columns)

    def select_rows(self, keep: list[bool]) -> "RawTable":
        cols = tuple(tuple(v for v, k in zip(col, keep) if k) for col in self.columns)
        return RawTable(self.names, cols)

    def drop_columns(self, drop) -> "RawTable":
        drop = set(drop)
        pairs = [(n, c) for n, c in zip(self.names, self.columns) if n not in drop]
        return RawTable(tuple(n for n, _ in pairs), tuple(c for _, c in pairs))


def _from_rows(header: list[str], rows: list[list[str | None]]) -> RawTable:
    if rows:
        cols = tuple(tuple(c) for c in zip(*rows))
    else:
        cols = tuple(() for _ in header)
    return RawTable(tuple(header), cols)


def load_raw(path) -> RawTable:
    """Read a comma-separated file with a header row.

    Raises ParseError naming the 0-based data row index when a row has a
    different number of fields than the header.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path} is empty (no header row)") from None
        width = len(header)
        rows = []
        for i, row in enumerate(reader):
            if len(row) != width:
                raise ParseError(
                    f"row {i} has {len(row)} fields, header has {width}"
                )
            rows.append([None if v == MISSING_TOKEN else v for v in row])
    return _from_rows(header, rows)


def write_raw(table: RawTable, path) -> None:
    """Inverse of load_raw: missing cells are written back as ``?``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.names)
        for row in table.rows():
            writer.writerow([MISSING_TOKEN if v is None else v for v in row])


# ---------------------------------------------------------------- id mappings

MAPPING_SECTIONS = {
    "admission_type_id": "admission_type",
    "discharge_disposition_id": "discharge_disposition",
    "admission_source_id": "admission_source",
}
NOT_MAPPED = "Not Mapped"


@dataclass(frozen=True)
class IdMappings:
    admission_type: dict[int, str] = field(default_factory=dict)
    discharge_disposition: dict[int, str] = field(default_factory=dict)
    admission_source: dict[int, str] = field(default_factory=dict)

    def describe(self, section: str, ident) -> str:
        return getattr(self, section).get(int(ident), NOT_MAPPED)


def load_id_mappings(path) -> IdMappings:
    """Parse IDS_mapping.csv: three ``<name>_id,description`` sections
    separated by blank (or all-empty) rows."""
    sections: dict[str, dict[int, str]] = {}
    current = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                current = None
                continue
            head = row[0].strip()
            if current is None:
                if head not in MAPPING_SECTIONS:
                    raise ParseError(
                        f"line {lineno}: malformed section header {head!r}"
                    )
                current = MAPPING_SECTIONS[head]
                if current in sections:
                    raise ParseError(f"line {lineno}: section {head!r} repeated")
                sections[current] = {}
                continue
            try:
                ident = int(head)
            except ValueError:
                raise ParseError(
                    f"line {lineno}: non-integer id {head!r} in section {current}"
                ) from None
            if ident <= 0:
                raise ParseError(f"line {lineno}: id {ident} is not positive")
            if ident in sections[current]:
                raise ParseError(
                    f"line {lineno}: duplicate id {ident} in section {current}"
                )
            desc = ",".join(row[1:]).strip()
            sections[current][ident] = desc
    missing = [s for s in MAPPING_SECTIONS.values() if s not in sections]
    if missing:
        raise ParseError(f"missing section(s): {', '.join(missing)}")
    return IdMappings(**sections)


# ------------------------------------------------------------ missing profile

@dataclass(frozen=True)
class MissingProfile:
    n_rows: int
    counts: dict[str, int]

    @property
    def fractions(self) -> dict[str, float]:
        if self.n_rows == 0:
            return {k: 0.0 for k in self.counts}
        return {k: c / self.n_rows for k, c in self.counts.items()}


def missing_profile(table: RawTable) -> MissingProfile:
    counts = {n: sum(v is None for v in col) for n, col in zip(table.names, table.columns)}
    return MissingProfile(table.n_rows, counts)


def write_missing_profile(profile: MissingProfile, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature", "fraction"])
        for name, frac in profile.fractions.items():
            writer.writerow([name, repr(frac)])


# -------------------------------------------------------------------- cleaning

@dataclass
class CleanLog:
    rows_in: int = 0
    rows_out: int = 0
    dropped_columns: list[str] = field(default_factory=list)
    # rows each predicate rejects on the input table; a row can hit several
    rule_hits: dict[str, int] = field(default_factory=dict)
    # rows removed by each rule when rules are applied in the listed order
    rule_drops: dict[str, int] = field(default_factory=dict)
    class_counts: dict[str, int] = field(default_factory=dict)

    def as_dict(self):
        return {
            "rows_in": self.rows_in,
            "rows_out": self.rows_out,
            "dropped_columns": list(self.dropped_columns),
            "rule_hits": dict(self.rule_hits),
            "rule_drops": dict(self.rule_drops),
            "class_counts": dict(self.class_counts),
        }


def _require(table: RawTable, names) -> None:
    for name in names:
        if name not in table.names:
            raise SchemaError(f"expected column {name!r} is absent")


def clean_with_log(table: RawTable) -> tuple[RawTable, CleanLog]:
    _require(table, REQUIRED_PRESENT + (LABEL_COLUMN,))
    rules = []
    for name in REQUIRED_PRESENT:
        col = table.column(name)
        rules.append((f"missing:{name}", [v is None for v in col]))
    for name in INVALID_FILTERED:
        col = table.column(name)
        rules.append((f"invalid:{name}", [v == INVALID_TOKEN for v in col]))

    out = CleanLog(rows_in=table.n_rows)
    alive = [True] * table.n_rows
    for rule, hit in rules:
        out.rule_hits[rule] = sum(hit)
        removed = 0
        for i, h in enumerate(hit):
            if h and alive[i]:
                alive[i] = False
                removed += 1
        out.rule_drops[rule] = removed
    for name in INVALID_FILTERED:
        if out.rule_hits[f"invalid:{name}"]:
            log.info("%d rows carry %r under %s", out.rule_hits[f"invalid:{name}"],
                     INVALID_TOKEN, name)

    kept = table.select_rows(alive)
    drop = [n for n in HIGHLY_MISSING + IDENTIFIERS if n in kept.names]
    kept = kept.drop_columns(drop)
    out.dropped_columns = drop
    out.rows_out = kept.n_rows
    counts = Counter(kept.column(LABEL_COLUMN))
    out.class_counts = {k: counts.get(k, 0) for k in ("NO", ">30", "<30")}
    for k in sorted(set(counts) - {"NO", ">30", "<30"}, key=str):
        out.class_counts[str(k)] = counts[k]
    log.info("clean: %d -> %d rows, classes %s", out.rows_in, out.rows_out,
             out.class_counts)
    return kept, out


def clean(table: RawTable) -> RawTable:
    """Drop the sparse and identifier columns, then every row with a missing
    race/gender/diagnosis or an ``Unknown/Invalid`` race or gender.
    Row order is preserved."""
    return clean_with_log(table)[0]
