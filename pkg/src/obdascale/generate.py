"""Value generation and CSV export.

Each column is an independent stream.  Row ``r`` of a column is NULL
according to an exact rational schedule; otherwise it takes the permutation
element at position ``j mod n``, where ``j`` counts the non-null rows before
``r`` (a closed form of the schedule), so no previously generated value is
ever consulted.
"""

from __future__ import annotations

import bisect
import csv
import datetime as dt
import hashlib
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ExportError
from .intervals import Interval, IntervalPlan
from .permutation import PermutationCursor, PermutationGenerator
from .schema import ColumnRef, Datatype, Schema

log = logging.getLogger(__name__)

BLOCK_ROWS = 4096


def address_to_interval_value(intervals, k: int, _starts=None) -> int:
    """The k-th integer (1-based) of the concatenated intervals."""
    if _starts is None:
        _starts = _prefix(intervals)
    total = _starts[-1]
    if not 1 <= k <= total:
        raise IndexError(f"address {k} outside [1, {total}]")
    i = bisect.bisect_left(_starts, k) - 1
    return intervals[i].lo + (k - _starts[i] - 1)


def _prefix(intervals):
    out = [0]
    for iv in intervals:
        out.append(out[-1] + iv.width)
    return out


def _stable_int(*parts) -> int:
    digest = hashlib.blake2b(":".join(str(p) for p in parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _decimal_encoder(places):
    if places == 0:
        return str
    scale = 10**places

    def enc(v):
        sign = "-" if v < 0 else ""
        q, r = divmod(abs(v), scale)
        return f"{sign}{q}.{r:0{places}d}"

    return enc


def make_encoder(datatype: Datatype, space: ColumnRef, places: int = 0, domain_values=None):
    """Injective map from planned integers to CSV text for one column."""
    if domain_values is not None:
        values = tuple(domain_values)
        size = len(values)
        return lambda v: values[(v - 1) % size]
    if datatype is Datatype.INTEGER:
        return str
    if datatype is Datatype.DECIMAL:
        return _decimal_encoder(places)
    if datatype is Datatype.DATE:
        return lambda v: dt.date.fromordinal(v).isoformat()
    if datatype is Datatype.TEXT:
        prefix = f"{space.table}_{space.name}_"
        return lambda v: prefix + str(v)
    raise ValueError(f"{datatype.value} columns are generated from their seed values only")


def make_batch_encoder(datatype: Datatype, space: ColumnRef, places: int = 0, domain_values=None):
    """Same map as :func:`make_encoder`, applied to an iterable of integers at once."""
    if domain_values is not None:
        values = tuple(domain_values)
        size = len(values)
        return lambda vs: [values[(v - 1) % size] for v in vs]
    if datatype is Datatype.INTEGER or (datatype is Datatype.DECIMAL and places == 0):
        return lambda vs: list(map(str, vs))
    if datatype is Datatype.TEXT:
        prefix = f"{space.table}_{space.name}_"
        return lambda vs: [prefix + t for t in map(str, vs)]
    enc = make_encoder(datatype, space, places)
    return lambda vs: list(map(enc, vs))


def encode_value(plan: IntervalPlan, ref: ColumnRef, v: int):
    return _encoder_for(plan, ref)(v)


def _encoder_args(plan: IntervalPlan, ref: ColumnRef):
    t = plan.targets[ref]
    space = plan.space[ref]
    return t.datatype, space, plan.space_places.get(space, 0), t.domain_values if t.fixed else None


def _encoder_for(plan: IntervalPlan, ref: ColumnRef):
    return make_encoder(*_encoder_args(plan, ref))


class NullSchedule:
    """Exactly ``k`` NULLs among ``rows`` rows, evenly spread, phase-shifted."""

    __slots__ = ("k", "rows", "phase", "_base")

    def __init__(self, k: int, rows: int, phase: int = 0):
        self.k, self.rows = k, rows
        self.phase = phase % rows if rows else 0
        self._base = self.phase * k // rows if rows else 0

    def is_null(self, r: int) -> bool:
        if self.k == 0:
            return False
        return (r + 1 + self.phase) * self.k // self.rows != (r + self.phase) * self.k // self.rows

    def nulls_before(self, r: int) -> int:
        if self.k == 0:
            return 0
        return (r + self.phase) * self.k // self.rows - self._base

    def null_rows(self, start: int, count: int) -> list[int]:
        """The NULL rows of [start, start+count), ascending, in O(number of NULLs).

        Row r is NULL iff some integer m has (r+phase)*k < m*rows <= (r+1+phase)*k,
        i.e. r = ceil(m*rows/k) - 1 - phase.
        """
        if self.k == 0 or count <= 0:
            return []
        k, rows, phase = self.k, self.rows, self.phase
        first = (start + phase) * k // rows + 1
        last = (start + count + phase) * k // rows
        return [(m * rows + k - 1) // k - 1 - phase for m in range(first, last + 1)]


@dataclass
class ColumnEmitter:
    ref: ColumnRef
    intervals: list[Interval]
    rows: int
    nulls: NullSchedule
    encoder: object
    generator: PermutationGenerator | None
    batch_encoder: object = None
    _cursor: PermutationCursor | None = field(default=None, repr=False)
    _starts: list = field(default_factory=list, repr=False)
    _next_row: int = 0

    def __post_init__(self):
        self._starts = _prefix(self.intervals)
        if self.generator is not None:
            self._cursor = PermutationCursor(self.generator)
        if self.batch_encoder is None:
            enc = self.encoder
            self.batch_encoder = lambda vs: list(map(enc, vs))

    @property
    def n(self) -> int:
        return self._starts[-1]

    @classmethod
    def from_plan(cls, plan: IntervalPlan, ref: ColumnRef, seed: int | None = None) -> "ColumnEmitter":
        intervals = plan.intervals.get(ref, [])
        t = plan.targets[ref]
        rows = plan.rows_out[ref.table]
        n = sum(iv.width for iv in intervals)
        k = t.nulls_out if n else rows
        if not n:
            gen = None
        elif seed is None:
            gen = PermutationGenerator.for_size(n)
        else:
            gen = PermutationGenerator.seeded(n, seed, str(ref))
        sched = NullSchedule(k, rows, _stable_int(seed, ref, "nulls") if rows else 0)
        args = _encoder_args(plan, ref)
        return cls(ref, list(intervals), rows, sched, make_encoder(*args), gen, make_batch_encoder(*args))

    def value(self, r: int):
        """Encoded value of row r (None for NULL); sequential calls are O(1)."""
        if self.nulls.is_null(r):
            return None
        j = r - self.nulls.nulls_before(r)
        k = self._cursor.value(j)
        return self.encoder(address_to_interval_value(self.intervals, k, self._starts))

    def block(self, start: int, count: int) -> list[str]:
        """CSV fields for rows [start, start+count); must be called in row order."""
        if start != self._next_row:
            raise ValueError(f"{self.ref}: block starts at {start}, expected {self._next_row}")
        self._next_row = start + count
        if self.generator is None:
            return [""] * count
        null_rows = self.nulls.null_rows(start, count)
        values = self._encode(self._cursor.take(count - len(null_rows)))
        if not null_rows:
            return values
        out, taken = [], 0
        for r in null_rows:
            upto = taken + (r - start - len(out))
            out.extend(values[taken:upto])
            taken = upto
            out.append("")
        out.extend(values[taken:])
        return out

    def _addresses(self, ks):
        if len(self.intervals) == 1:
            off = self.intervals[0].lo - 1
            return map(off.__add__, ks) if off else ks
        starts, lows = self._starts, [iv.lo for iv in self.intervals]
        out = []
        for k in ks:
            i = bisect.bisect_left(starts, k) - 1
            out.append(lows[i] + k - starts[i] - 1)
        return out

    def _encode(self, ks):
        return self.batch_encoder(self._addresses(ks))


class TableGenerator:
    def __init__(self, plan: IntervalPlan, table: str, seed: int | None = None):
        self.table = table
        self.rows = plan.rows_out[table]
        self.columns = [c.ref for c in plan.schema.tables[table].columns]
        self.emitters = [ColumnEmitter.from_plan(plan, ref, seed) for ref in self.columns]

    def emit_row(self, row_index: int) -> list:
        if not 0 <= row_index < self.rows:
            raise IndexError(f"row {row_index} outside [0, {self.rows})")
        return [e.value(row_index) for e in self.emitters]

    def blocks(self, pool=None, block_rows: int = BLOCK_ROWS):
        """Yield lists of CSV rows in row order."""
        for start in range(0, self.rows, block_rows):
            count = min(block_rows, self.rows - start)
            if pool is None:
                cols = [e.block(start, count) for e in self.emitters]
            else:
                cols = list(pool.map(lambda e: e.block(start, count), self.emitters))
            yield list(zip(*cols))


def emit_row(plan: IntervalPlan, table: str, row_index: int, seed: int | None = None) -> list:
    return TableGenerator(plan, table, seed).emit_row(row_index)


@dataclass
class TableSummary:
    table: str
    rows: int
    bytes: int
    seconds: float


@dataclass
class ExportSummary:
    tables: list[TableSummary]

    @property
    def rows(self) -> int:
        return sum(t.rows for t in self.tables)

    @property
    def seconds(self) -> float:
        return sum(t.seconds for t in self.tables)

    def report(self, timings: bool = False) -> str:
        """Per-table rows and bytes; elapsed seconds only when ``timings`` is set.

        The copy written next to the CSVs omits timings so that repeated runs
        produce byte-identical output directories.
        """
        total_bytes = sum(t.bytes for t in self.tables)
        if timings:
            lines = ["table rows bytes seconds"]
            lines += [f"{t.table} {t.rows} {t.bytes} {t.seconds:.3f}" for t in self.tables]
            lines.append(f"total {self.rows} {total_bytes} {self.seconds:.3f}")
        else:
            lines = ["table rows bytes"]
            lines += [f"{t.table} {t.rows} {t.bytes}" for t in self.tables]
            lines.append(f"total {self.rows} {total_bytes}")
        return "\n".join(lines) + "\n"


def write_table(plan: IntervalPlan, table: str, path: Path, seed: int | None = None, pool=None) -> int:
    gen = TableGenerator(plan, table, seed)
    header = plan.schema.tables[table].column_names
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for rows in gen.blocks(pool):
            writer.writerows(rows)
    return path.stat().st_size


def export_instance(schema: Schema, plan: IntervalPlan, out_dir, parallelism: int = 1, seed: int | None = None) -> ExportSummary:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    summaries = []
    pool = ThreadPoolExecutor(parallelism) if parallelism > 1 else None
    try:
        for table in schema.tables:
            final = out_dir / f"{table}.csv"
            partial = out_dir / f"{table}.csv.partial"
            written.append(partial)
            t0 = time.perf_counter()
            size = write_table(plan, table, partial, seed, pool)
            os.replace(partial, final)
            written[-1] = final
            elapsed = time.perf_counter() - t0
            summaries.append(TableSummary(table, plan.rows_out[table], size, elapsed))
            log.info("wrote %s: %d rows, %d bytes in %.2fs", final, plan.rows_out[table], size, elapsed)
        summary = ExportSummary(summaries)
        (out_dir / "_report.txt").write_text(summary.report(), encoding="utf-8")
        return summary
    except OSError as exc:
        _cleanup(written)
        raise ExportError(f"export failed: {exc}") from exc
    except BaseException:
        _cleanup(written)
        raise
    finally:
        if pool is not None:
            pool.shutdown()


def _cleanup(paths):
    for p in paths:
        try:
            p.unlink()
        except FileNotFoundError:
            pass
