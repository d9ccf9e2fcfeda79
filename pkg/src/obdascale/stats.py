"""Exact statistics over the seed instance.

Every table lives in ``<data_dir>/<table>.csv`` (RFC 4180, header row equal
to the schema's column order).  An empty field or the literal ``\\N`` is NULL.
"""

from __future__ import annotations

import csv
import datetime as dt
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .errors import DataError, InputOutputError, ValidationError
from .schema import ColumnRef, Datatype, Schema

log = logging.getLogger(__name__)

NULL_TOKENS = frozenset(["", "\\N"])
VENN_CAP = 12

_TRUE = {"true", "t", "1", "yes", "y"}
_FALSE = {"false", "f", "0", "no", "n"}


def _coerce_boolean(text):
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(text)


def _coerce_decimal(text):
    try:
        value = Decimal(text.strip())
    except InvalidOperation:
        raise ValueError(text) from None
    if not value.is_finite():
        raise ValueError(text)
    return value


COERCE = {
    Datatype.INTEGER: lambda s: int(s.strip()),
    Datatype.DECIMAL: _coerce_decimal,
    Datatype.TEXT: lambda s: s,
    Datatype.DATE: lambda s: dt.date.fromisoformat(s.strip()),
    Datatype.BOOLEAN: _coerce_boolean,
}


@dataclass
class ColumnStats:
    rows: int
    distinct: int
    null_count: int
    min_numeric: int | None = None
    decimal_places: int = 0
    domain_values: tuple[str, ...] | None = None

    @property
    def null_ratio(self) -> Fraction:
        return Fraction(self.null_count, self.rows) if self.rows else Fraction(0)


@dataclass
class TableStats:
    rows: int
    columns: dict[str, ColumnStats] = field(default_factory=dict)


@dataclass
class VennCounts:
    cluster: tuple[ColumnRef, ...]
    region_counts: dict[frozenset, int]

    def overlap(self, *columns: ColumnRef) -> int:
        """Number of values shared by all the given columns."""
        want = set(columns)
        return sum(n for h, n in self.region_counts.items() if want <= h)

    def distinct(self, column: ColumnRef) -> int:
        return self.overlap(column)


def table_path(data_dir, table: str) -> Path:
    return Path(data_dir) / f"{table}.csv"


def _open_reader(schema: Schema, data_dir, table: str):
    path = table_path(data_dir, table)
    if not path.exists():
        raise InputOutputError(f"missing data file {path}")
    f = open(path, newline="", encoding="utf-8")
    reader = csv.reader(f)
    header = next(reader, None)
    expected = schema.tables[table].column_names
    if header is None or [h.strip() for h in header] != expected:
        f.close()
        raise DataError(f"{path}: header {header} does not match schema columns {expected}")
    return f, reader


def _address_min(dtype: Datatype, value, places: int) -> int | None:
    if value is None:
        return None
    if dtype is Datatype.INTEGER:
        return value
    if dtype is Datatype.DECIMAL:
        return int(value.scaleb(places))
    if dtype is Datatype.DATE:
        return value.toordinal()
    return None


def scan_table(schema: Schema, data_dir, table: str, fixed: Iterable[ColumnRef] = ()) -> TableStats:
    tdef = schema.tables[table]
    fixed = {ref for ref in fixed if ref.table == table}
    ncols = len(tdef.columns)
    coercers = [COERCE[c.datatype] for c in tdef.columns]
    seen: list[set] = [set() for _ in range(ncols)]
    nulls = [0] * ncols
    mins = [None] * ncols
    places = [0] * ncols
    domains: list[dict | None] = [{} if c.ref in fixed else None for c in tdef.columns]
    numeric = [c.datatype.numeric for c in tdef.columns]
    is_decimal = [c.datatype is Datatype.DECIMAL for c in tdef.columns]
    nullable = [c.nullable for c in tdef.columns]

    pk = schema.primary_keys.get(table)
    pk_idx = [tdef.column_names.index(n) for n in pk.columns] if pk and len(pk.columns) > 1 else None
    pk_tuples = set()

    rows = 0
    f, reader = _open_reader(schema, data_dir, table)
    with f:
        for lineno, record in enumerate(reader, start=2):
            if not record:
                if ncols != 1:
                    continue
                record = [""]
            if len(record) != ncols:
                raise DataError(f"{table}.csv line {lineno}: expected {ncols} fields, got {len(record)}")
            rows += 1
            coerced = [None] * ncols
            for i, raw in enumerate(record):
                if raw in NULL_TOKENS:
                    if not nullable[i]:
                        raise DataError(f"{table}.csv line {lineno}: NULL in non-nullable column {tdef.columns[i].name}")
                    nulls[i] += 1
                    continue
                try:
                    value = coercers[i](raw)
                except ValueError:
                    col = tdef.columns[i]
                    raise DataError(
                        f"{table}.csv line {lineno}, column {col.name}: cannot read {raw!r} as {col.datatype.value}"
                    ) from None
                coerced[i] = value
                if value not in seen[i]:
                    seen[i].add(value)
                    if domains[i] is not None:
                        domains[i][value] = raw
                    if numeric[i] and (mins[i] is None or value < mins[i]):
                        mins[i] = value
                    if is_decimal[i]:
                        exp = value.as_tuple().exponent
                        places[i] = max(places[i], -exp if exp < 0 else 0)
            if pk_idx is not None:
                key = tuple(coerced[i] for i in pk_idx)
                if key in pk_tuples:
                    raise ValidationError(f"seed violates primary key of {table}: duplicate {key}")
                pk_tuples.add(key)

    stats = TableStats(rows)
    for i, col in enumerate(tdef.columns):
        stats.columns[col.name] = ColumnStats(
            rows=rows,
            distinct=len(seen[i]),
            null_count=nulls[i],
            min_numeric=_address_min(col.datatype, mins[i], places[i]),
            decimal_places=places[i],
            domain_values=tuple(domains[i].values()) if domains[i] is not None else None,
        )
        if schema.is_unique(col.ref) and len(seen[i]) != rows - nulls[i]:
            kind = "primary key" if pk and pk.columns == (col.name,) else "unique constraint"
            raise ValidationError(f"seed violates {kind} on {col.ref}: duplicate values")
    log.debug("scanned %s: %d rows", table, rows)
    return stats


def scan_instance(schema: Schema, data_dir, fixed: Iterable[ColumnRef] | None = None, parallelism: int = 1):
    """Scan every table of the seed; returns ``{table: TableStats}``.

    ``fixed`` names the fixed-domain columns whose value lists are retained;
    it defaults to the columns declared ``fixed`` in the schema.
    """
    fixed = set(schema.fixed_declared() if fixed is None else fixed)
    names = list(schema.tables)
    if parallelism > 1:
        with ThreadPoolExecutor(parallelism) as pool:
            results = list(pool.map(lambda t: scan_table(schema, data_dir, t, fixed), names))
    else:
        results = [scan_table(schema, data_dir, t, fixed) for t in names]
    return dict(zip(names, results))


def column_values(schema: Schema, data_dir, ref: ColumnRef) -> set:
    """Set of distinct non-null (coerced) values of one column."""
    tdef = schema.tables[ref.table]
    idx = tdef.column_names.index(ref.name)
    coerce = COERCE[tdef.columns[idx].datatype]
    out = set()
    f, reader = _open_reader(schema, data_dir, ref.table)
    with f:
        for record in reader:
            if not record:
                if len(tdef.columns) != 1:
                    continue
                record = [""]
            raw = record[idx]
            if raw not in NULL_TOKENS:
                out.add(coerce(raw))
    return out


def region_counts_from_sets(columns, sets) -> dict[frozenset, int]:
    """Venn partition: for every non-empty subset H, values in exactly the columns of H."""
    columns = list(columns)
    membership: dict = {}
    for bit, values in enumerate(sets):
        for v in values:
            membership[v] = membership.get(v, 0) | (1 << bit)
    by_mask: dict[int, int] = {}
    for mask in membership.values():
        by_mask[mask] = by_mask.get(mask, 0) + 1
    out = {}
    for size in range(1, len(columns) + 1):
        for combo in itertools.combinations(range(len(columns)), size):
            mask = sum(1 << i for i in combo)
            out[frozenset(columns[i] for i in combo)] = by_mask.get(mask, 0)
    return out


def literal_region_counts(columns, sets) -> dict[frozenset, int]:
    """Region sizes under the set-difference reading |∩H \\ ∩K_H|.

    K_H gathers the columns of every strict superset of H, so the subtracted
    set is the intersection over the whole cluster.  Agrees with the Venn
    partition for clusters of two columns only.
    """
    columns = list(columns)
    sets = [set(s) for s in sets]
    everything = set.intersection(*sets) if sets else set()
    out = {}
    for size in range(1, len(columns) + 1):
        for combo in itertools.combinations(range(len(columns)), size):
            inter = set.intersection(*(sets[i] for i in combo))
            if size < len(columns):
                inter -= everything
            out[frozenset(columns[i] for i in combo)] = len(inter)
    return out


def venn_profile(cluster, data_dir, schema: Schema, cap: int = VENN_CAP) -> VennCounts:
    cols = tuple(sorted(cluster))
    if len(cols) > cap:
        raise ValidationError(
            f"cluster of {len(cols)} columns exceeds the Venn enumeration cap of {cap}; "
            "split the cluster's mappings or raise the cap"
        )
    sets = [column_values(schema, data_dir, ref) for ref in cols]
    return VennCounts(cols, region_counts_from_sets(cols, sets))
