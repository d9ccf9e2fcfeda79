"""Self-check of an exported instance against the schema and the plan."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import InputOutputError
from .intervals import IntervalPlan
from .schema import ColumnRef, Schema
from .stats import NULL_TOKENS, region_counts_from_sets


@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    expected: object = None
    actual: object = None
    detail: str = ""

    def __str__(self):
        parts = [self.kind, self.where]
        if self.expected is not None or self.actual is not None:
            parts.append(f"expected={self.expected} actual={self.actual}")
        if self.detail:
            parts.append(self.detail)
        return " ".join(parts)


@dataclass
class _TableScan:
    rows: int
    values: dict[str, set]
    nulls: dict[str, int]
    pk_duplicates: int
    pk_example: tuple | None


def _scan_output(schema: Schema, out_dir: Path, table: str) -> _TableScan:
    path = out_dir / f"{table}.csv"
    tdef = schema.tables[table]
    names = tdef.column_names
    try:
        f = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputOutputError(f"cannot read {path}: {exc}") from exc
    values = [set() for _ in names]
    nulls = [0] * len(names)
    pk = schema.primary_keys.get(table)
    pk_idx = [names.index(c) for c in pk.columns] if pk else None
    seen_keys, dups, example = set(), 0, None
    rows = 0
    with f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != names:
            raise InputOutputError(f"{path}: unexpected header {header}")
        for record in reader:
            if not record:
                if len(names) != 1:
                    continue
                record = [""]
            rows += 1
            for i, raw in enumerate(record):
                if raw in NULL_TOKENS:
                    nulls[i] += 1
                else:
                    values[i].add(raw)
            if pk_idx is not None:
                key = tuple(record[i] for i in pk_idx)
                if key in seen_keys:
                    dups += 1
                    example = example or key
                else:
                    seen_keys.add(key)
    return _TableScan(rows, dict(zip(names, values)), dict(zip(names, nulls)), dups, example)


def validate_output(schema: Schema, out_dir, plan: IntervalPlan | None = None) -> list[Violation]:
    """Re-scan an exported instance; an empty list means every check passed.

    Always checked: primary-key and unique duplicates, FK orphans (one
    violation per orphan value).  With a plan: row counts, distinct counts
    (exact), NULL counts (within one) and cluster Venn regions (exact).
    """
    out_dir = Path(out_dir)
    scans = {t: _scan_output(schema, out_dir, t) for t in schema.tables}
    found: list[Violation] = []

    for table, scan in scans.items():
        if scan.pk_duplicates:
            found.append(Violation("pk-duplicate", table, 0, scan.pk_duplicates, f"e.g. {scan.pk_example}"))
    for ref in sorted(schema.unique):
        scan = scans[ref.table]
        nonnull = scan.rows - scan.nulls[ref.name]
        if len(scan.values[ref.name]) != nonnull:
            found.append(Violation("unique-duplicate", str(ref), nonnull, len(scan.values[ref.name])))
    for fk in schema.foreign_keys:
        child = scans[fk.child.table].values[fk.child.name]
        parent = scans[fk.parent.table].values[fk.parent.name]
        for orphan in sorted(child - parent):
            found.append(Violation("fk-orphan", f"{fk.child} -> {fk.parent}", detail=f"value {orphan!r}"))

    if plan is None:
        return found

    for table, scan in scans.items():
        if scan.rows != plan.rows_out[table]:
            found.append(Violation("row-count", table, plan.rows_out[table], scan.rows))
        for col in schema.tables[table].columns:
            t = plan.targets[col.ref]
            measured = len(scan.values[col.name])
            if measured != t.distinct_out:
                found.append(Violation("distinct", str(col.ref), t.distinct_out, measured))
            nulls = scan.nulls[col.name]
            if abs(nulls - t.nulls_out) > 1:
                found.append(Violation("null-count", str(col.ref), t.nulls_out, nulls))

    for layout in plan.clusters:
        cols = layout.venn.cluster
        sets = [scans[c.table].values[c.name] for c in cols]
        measured = region_counts_from_sets(cols, sets)
        for h, count in measured.items():
            planned = layout.regions[h].width if h in layout.regions else 0
            if count != planned:
                where = "{" + ",".join(str(c) for c in sorted(h)) + "}"
                found.append(Violation("venn-region", where, planned, count))
    return found


def measured_overlap(out_dir, schema: Schema, a: ColumnRef, b: ColumnRef) -> int:
    out_dir = Path(out_dir)
    va = _scan_output(schema, out_dir, a.table).values[a.name]
    vb = _scan_output(schema, out_dir, b.table).values[b.name]
    return len(va & vb)
