"""Planning: target sizes, key repair, cluster intervals and FK alignment.

The result is an :class:`IntervalPlan` that fixes, for every column, the
ordered disjoint integer intervals its values are drawn from.  Generation
needs nothing else.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from . import csp
from .errors import PlanningError, UnsatError
from .mappings import PreCluster
from .schema import ColumnRef, Datatype, Schema, closure_star
from .stats import TableStats, VennCounts

log = logging.getLogger(__name__)

LCM_REPAIR_LIMIT = 10**6
_MAX_ORDINAL = dt.date.max.toordinal()


def round_half_up(x) -> int:
    return math.floor(Fraction(x) + Fraction(1, 2))


def as_fraction(s) -> Fraction:
    return s if isinstance(s, Fraction) else Fraction(str(s))


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int
    tag: str = "simple"

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo},{self.hi}]")

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    def __contains__(self, v):
        return self.lo <= v <= self.hi


@dataclass
class ColumnTarget:
    ref: ColumnRef
    datatype: Datatype
    distinct_out: int
    nulls_out: int
    fixed: bool
    seed_distinct: int
    min_numeric: int | None = None
    decimal_places: int = 0
    domain_values: tuple | None = None


@dataclass
class ScaleTargets:
    scale: Fraction
    rows_out: dict[str, int]
    columns: dict[ColumnRef, ColumnTarget]

    def __getitem__(self, ref) -> ColumnTarget:
        return self.columns[ref]

    def budget(self, ref: ColumnRef) -> int:
        """Non-null rows available to a column."""
        return self.rows_out[ref.table] - self.columns[ref].nulls_out


@dataclass(frozen=True)
class ColumnsCluster:
    columns: frozenset[ColumnRef]
    preclusters: tuple[PreCluster, ...]
    closure: frozenset[ColumnRef]

    @property
    def key(self) -> ColumnRef:
        return min(self.columns)

    @property
    def outside(self) -> frozenset[ColumnRef]:
        """Columns FK-reachable from the cluster but not in it."""
        return self.closure - self.columns

    def __str__(self):
        return "{" + ", ".join(str(c) for c in sorted(self.columns)) + "}"


@dataclass
class ClusterLayout:
    cluster: ColumnsCluster
    venn: VennCounts
    regions: dict[frozenset, Interval]
    extra: Interval | None = None
    context: csp.ClusterContext | None = None
    problem: csp.CspProblem | None = None
    solution: dict | None = None

    def planned_overlap(self, *columns) -> int:
        want = set(columns)
        return sum(iv.width for h, iv in self.regions.items() if want <= h)


@dataclass
class IntervalPlan:
    schema: Schema
    targets: ScaleTargets
    intervals: dict[ColumnRef, list[Interval]] = field(default_factory=dict)
    space: dict[ColumnRef, ColumnRef] = field(default_factory=dict)
    space_places: dict[ColumnRef, int] = field(default_factory=dict)
    clusters: list[ClusterLayout] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def rows_out(self) -> dict[str, int]:
        return self.targets.rows_out

    def distinct(self, ref: ColumnRef) -> int:
        return sum(iv.width for iv in self.intervals.get(ref, ()))

    def report(self) -> str:
        return plan_report(self)


# -- initialization -------------------------------------------------------


def effective_fixed_domain(schema: Schema, fixed: Iterable[ColumnRef]) -> set[ColumnRef]:
    """Fixed-domain set after adding BOOLEAN columns and FK children of fixed parents."""
    out = set(fixed)
    out |= {c.ref for c in schema.all_columns() if c.datatype is Datatype.BOOLEAN}
    for ref in schema.column_order():
        if any(p in out for p in schema.parents_of(ref)):
            out.add(ref)
    for fk in schema.foreign_keys:
        if fk.child in out and fk.parent not in out:
            raise PlanningError(
                f"fixed-domain column {fk.child} references {fk.parent}, which is not fixed-domain"
            )
    return out


def initialize_targets(schema: Schema, stats: dict[str, TableStats], fixed, s) -> ScaleTargets:
    s = as_fraction(s)
    if s <= 0:
        raise PlanningError("scale factor must be positive")
    rows_out, columns = {}, {}
    for table in schema.tables.values():
        tstats = stats[table.name]
        rows = round_half_up(tstats.rows * s)
        rows_out[table.name] = rows
        for col in table.columns:
            cs = tstats.columns[col.name]
            nulls = round_half_up(cs.null_ratio * rows) if col.nullable else 0
            is_fixed = col.ref in fixed
            if is_fixed:
                if cs.domain_values is None:
                    raise PlanningError(f"no domain values captured for fixed-domain column {col.ref}")
                distinct = cs.distinct
            else:
                distinct = round_half_up(cs.distinct * s)
                if cs.distinct >= 1:
                    distinct = max(distinct, 1)
            budget = rows - nulls
            if schema.is_unique(col.ref) and not is_fixed:
                distinct = budget
            if distinct > budget:
                log.debug("capping distinct of %s from %d to %d", col.ref, distinct, budget)
                distinct = max(budget, 0)
            columns[col.ref] = ColumnTarget(
                col.ref,
                col.datatype,
                distinct,
                nulls,
                is_fixed,
                cs.distinct,
                cs.min_numeric,
                cs.decimal_places,
                cs.domain_values,
            )
    return ScaleTargets(s, rows_out, columns)


def _lcm(values):
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def repair_primary_key(targets: ScaleTargets, pk, schema: Schema | None = None) -> ScaleTargets:
    """Grow PK column distinct counts until their lcm exceeds the row count.

    When no column can grow further, lcm equal to the row count is accepted:
    it already makes every key tuple distinct.

    Mutates and returns ``targets``.  The column with the smallest distinct
    count is incremented first; a column is never grown past its row budget
    or past the distinct count of its FK parent.
    """
    rows = targets.rows_out[pk.table]
    refs = pk.refs
    cols = [targets[r] for r in refs]
    if rows == 0:
        return targets
    if len(refs) == 1:
        col = cols[0]
        if col.distinct_out != rows:
            if col.fixed:
                raise PlanningError(
                    f"primary key {col.ref} is fixed-domain with {col.distinct_out} values but needs {rows}"
                )
            col.distinct_out = rows
        return targets
    for col in cols:
        if col.distinct_out < 1:
            raise PlanningError(f"primary key column {col.ref} has no values")

    def ceiling(col):
        cap = targets.budget(col.ref)
        if schema is not None:
            for parent in schema.parents_of(col.ref):
                cap = min(cap, targets[parent].distinct_out)
        return cap

    for _ in range(LCM_REPAIR_LIMIT):
        if _lcm(c.distinct_out for c in cols) > rows:
            return targets
        growable = [c for c in cols if not c.fixed and c.distinct_out < ceiling(c)]
        if not growable:
            if _lcm(c.distinct_out for c in cols) == rows:
                # Tuples (r mod d1, ..., r mod dn) are already distinct for r < lcm.
                log.info("primary key of %s: lcm equals %d rows and no column can grow; accepted", pk.table, rows)
                return targets
            raise PlanningError(
                f"cannot satisfy primary key of {pk.table}: lcm of distinct counts "
                f"{[c.distinct_out for c in cols]} must exceed {rows} rows"
            )
        min(growable, key=lambda c: c.distinct_out).distinct_out += 1
    raise PlanningError(f"primary key repair for {pk.table} did not converge in {LCM_REPAIR_LIMIT} steps")


# -- clusters --------------------------------------------------------------


def merge_clusters(preclusters, schema: Schema) -> list[ColumnsCluster]:
    """Group pre-clusters whose FK closures intersect (transitively)."""
    pcs = sorted(set(preclusters), key=lambda pc: (pc.symbol, pc.position, sorted(pc.columns)))
    closures = []
    for pc in pcs:
        reach = set()
        for c in pc.columns:
            reach |= closure_star(schema, c)
        closures.append(frozenset(reach))
    parent = list(range(len(pcs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[ColumnRef, int] = {}
    for i, reach in enumerate(closures):
        for c in reach:
            if c in owner:
                a, b = find(i), find(owner[c])
                if a != b:
                    parent[max(a, b)] = min(a, b)
            else:
                owner[c] = i
    groups: dict[int, list[int]] = {}
    for i in range(len(pcs)):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        cols = frozenset().union(*(pcs[i].columns for i in members))
        reach = frozenset().union(*(closures[i] for i in members))
        out.append(ColumnsCluster(cols, tuple(pcs[i] for i in members), reach))
    return sorted(out, key=lambda cc: cc.key)


def _region_order(h):
    return (-len(h), sorted(h))


def _region_tag(h):
    return "venn{" + ",".join(str(c) for c in sorted(h)) + "}"


def allocate_cluster_intervals(
    cluster: ColumnsCluster,
    venn: VennCounts,
    s,
    targets: ScaleTargets,
    base: int = 1,
    schema: Schema | None = None,
) -> ClusterLayout:
    """Lay out one interval per non-empty Venn region, then reconcile column totals.

    A column's total is reconciled to its target by resizing its
    single-column region, which changes no overlap with other columns.  FK
    children whose parent is in the same cluster cannot own private values;
    their target becomes the sum of their shared regions instead.
    """
    s = as_fraction(s)
    for c in cluster.columns:
        if targets[c].fixed:
            raise PlanningError(f"cluster column {c} is fixed-domain; join selectivity cannot be scaled for it")
    widths = {}
    for h, count in venn.region_counts.items():
        if count > 0:
            w = round_half_up(count * s)
            if w > 0:
                widths[h] = w

    for c in sorted(cluster.columns):
        t = targets[c]
        current = sum(w for h, w in widths.items() if c in h)
        diff = t.distinct_out - current
        if diff == 0:
            continue
        in_cluster_parent = schema is not None and any(p in cluster.columns for p in schema.parents_of(c))
        own = frozenset([c])
        if not in_cluster_parent:
            new = widths.get(own, 0) + diff
            if new > 0:
                widths[own] = new
                continue
            widths.pop(own, None)
        actual = sum(w for h, w in widths.items() if c in h)
        if schema is not None and schema.is_unique(c) and actual != targets.budget(c):
            raise PlanningError(
                f"cluster column {c} must hold {targets.budget(c)} unique values but its shared regions give {actual}"
            )
        log.info("distinct target of %s adjusted from %d to %d by cluster reconciliation", c, t.distinct_out, actual)
        t.distinct_out = actual

    regions = {}
    cursor = base
    for h in sorted(widths, key=_region_order):
        regions[h] = Interval(cursor, cursor + widths[h] - 1, _region_tag(h))
        cursor += widths[h]
    return ClusterLayout(cluster, venn, regions)


# -- plan construction -------------------------------------------------------


def _assign_spaces(plan: IntervalPlan, clusters):
    schema = plan.schema
    for cc in clusters:
        for c in cc.closure:
            plan.space[c] = cc.key
    for col in schema.all_columns():
        if col.ref not in plan.space:
            plan.space[col.ref] = min(closure_star(schema, col.ref))
    for ref, key in plan.space.items():
        places = plan.targets[ref].decimal_places
        plan.space_places[key] = max(plan.space_places.get(key, 0), places)


def _anchor(plan: IntervalPlan, ref: ColumnRef) -> int | None:
    """Seed minimum of a column expressed in its value space's units."""
    t = plan.targets[ref]
    if t.min_numeric is None:
        return None
    if t.datatype is Datatype.DECIMAL:
        return t.min_numeric * 10 ** (plan.space_places[plan.space[ref]] - t.decimal_places)
    return t.min_numeric


def _cluster_base(plan: IntervalPlan, cc: ColumnsCluster) -> int:
    if not plan.targets[cc.key].datatype.numeric:
        return 1
    anchors = [a for a in (_anchor(plan, c) for c in cc.columns) if a is not None]
    return min(anchors) if anchors else 1


def _simple_interval(plan: IntervalPlan, ref: ColumnRef) -> list[Interval]:
    t = plan.targets[ref]
    n = t.distinct_out
    if n == 0:
        return []
    if t.fixed:
        return [Interval(1, n, "fixed")]
    lo = _anchor(plan, ref)
    if lo is None:
        lo = 1
    return [Interval(lo, lo + n - 1, "simple")]


def align_foreign_keys(plan: IntervalPlan, schema: Schema, clusters) -> IntervalPlan:
    """Place FK child columns inside their parents' value spaces.

    Children outside every cluster reach take a prefix of the parent's single
    interval.  Columns reachable from a cluster but not in it are placed by
    the constraint solver.  FKs between two cluster columns already hold.
    """
    reach = set()
    for cc in clusters:
        reach |= cc.closure
    for ref in schema.column_order():
        parents = schema.parents_of(ref)
        if not parents or ref in reach:
            continue
        t = plan.targets[ref]
        if t.fixed:
            continue
        parent = parents[0]
        pd = plan.targets[parent].distinct_out
        if t.distinct_out > pd:
            raise PlanningError(
                f"foreign key {ref} -> {parent}: child needs {t.distinct_out} distinct values, parent has {pd}"
            )
        pints = plan.intervals.get(parent, [])
        if t.distinct_out == 0:
            plan.intervals[ref] = []
            continue
        if len(pints) != 1:
            raise PlanningError(f"foreign key parent {parent} has {len(pints)} intervals; expected one")
        lo = pints[0].lo
        plan.intervals[ref] = [Interval(lo, lo + t.distinct_out - 1, "fk-aligned")]

    for layout in plan.clusters:
        _solve_cluster(plan, schema, layout)
    return plan


def _solve_cluster(plan: IntervalPlan, schema: Schema, layout: ClusterLayout):
    cc = layout.cluster
    outside = sorted(cc.outside)
    if not outside:
        return
    for c in outside:
        if plan.targets[c].fixed:
            raise PlanningError(f"column {c} is fixed-domain but FK-connected to cluster {cc}")
    blocks = [(iv.lo, iv.hi) for _, iv in sorted(layout.regions.items(), key=lambda kv: kv[1].lo)]
    end = max((iv.hi for iv in layout.regions.values()), default=_cluster_base(plan, cc) - 1)
    extra_width = max(plan.targets[c].distinct_out for c in outside)
    if extra_width > 0:
        layout.extra = Interval(end + 1, end + extra_width, "extra")
        blocks.append((layout.extra.lo, layout.extra.hi))
    members = {}
    for c in sorted(cc.columns):
        owned = {i for i, (lo, hi) in enumerate(blocks) if any(iv.lo == lo for iv in plan.intervals.get(c, []))}
        members[c] = owned
    fks = [(fk.child, fk.parent) for fk in schema.foreign_keys if fk.child in cc.closure]
    ctx = csp.ClusterContext(
        blocks,
        members,
        {c: plan.targets[c].distinct_out for c in outside},
        fks,
        label=str(cc),
    )
    problem = csp.encode(ctx)
    solution = csp.solve(problem)
    if solution is None:
        raise UnsatError(f"no interval placement satisfies the foreign keys around cluster {cc}", cluster=str(cc))
    bad = csp.verify(problem, solution)
    if bad:
        raise PlanningError(f"solver returned an invalid assignment for cluster {cc}: {bad[:3]}")
    for c, ints in csp.decode(ctx, solution).items():
        plan.intervals[c] = [Interval(lo, hi, "csp") for lo, hi in ints]
    layout.context, layout.problem, layout.solution = ctx, problem, solution


def build_plan(
    schema: Schema,
    stats: dict[str, TableStats],
    scale,
    fixed: Iterable[ColumnRef] = (),
    clusters: Iterable[ColumnsCluster] = (),
    venns: dict | None = None,
    diagnostics: Iterable[str] = (),
) -> IntervalPlan:
    """Run every planning phase in order and return the finished plan.

    ``venns`` maps each cluster's column set to its seed :class:`VennCounts`.
    """
    scale = as_fraction(scale)
    clusters = list(clusters)
    venns = venns or {}
    fixed = effective_fixed_domain(schema, fixed)
    targets = initialize_targets(schema, stats, fixed, scale)
    for table in schema.table_order():
        pk = schema.primary_keys.get(table)
        if pk is not None:
            repair_primary_key(targets, pk, schema)

    plan = IntervalPlan(schema, targets, diagnostics=list(diagnostics))
    _assign_spaces(plan, clusters)

    in_cluster = set()
    for cc in clusters:
        venn = venns.get(cc.columns)
        if venn is None:
            raise PlanningError(f"no Venn profile for cluster {cc}")
        layout = allocate_cluster_intervals(cc, venn, scale, targets, _cluster_base(plan, cc), schema)
        plan.clusters.append(layout)
        for c in cc.columns:
            plan.intervals[c] = sorted(
                (iv for h, iv in layout.regions.items() if c in h), key=lambda iv: iv.lo
            )
        in_cluster |= cc.closure

    for ref in schema.column_order():
        if ref in in_cluster:
            continue
        if schema.parents_of(ref) and not targets[ref].fixed:
            continue
        plan.intervals[ref] = _simple_interval(plan, ref)

    align_foreign_keys(plan, schema, clusters)
    _check_plan(plan)
    return plan


def _check_plan(plan: IntervalPlan):
    for ref, ints in plan.intervals.items():
        t = plan.targets[ref]
        total = sum(iv.width for iv in ints)
        if total != t.distinct_out:
            raise PlanningError(f"{ref}: planned width {total} differs from target {t.distinct_out}")
        if t.distinct_out > plan.targets.budget(ref):
            raise PlanningError(
                f"{ref}: {t.distinct_out} distinct values do not fit in {plan.targets.budget(ref)} non-null rows"
            )
        for a, b in zip(ints, ints[1:]):
            if a.hi >= b.lo:
                raise PlanningError(f"{ref}: intervals overlap or are unordered")
        if t.datatype is Datatype.DATE and not t.fixed and ints:
            if ints[0].lo < 1 or ints[-1].hi > _MAX_ORDINAL:
                raise PlanningError(f"{ref}: scaled dates run past the supported calendar range")


# -- reporting ---------------------------------------------------------------


def plan_report(plan: IntervalPlan) -> str:
    lines = [f"# scale {plan.targets.scale}"]
    for table in plan.schema.tables.values():
        lines.append(f"# table {table.name} rows {plan.rows_out[table.name]}")
    for cc in plan.clusters:
        lines.append(f"# cluster {cc.cluster} reach {{{', '.join(str(c) for c in sorted(cc.cluster.closure))}}}")
        if cc.extra is not None:
            lines.append(f"# cluster {cc.cluster} extra [{cc.extra.lo},{cc.extra.hi}]")
    for note in plan.diagnostics:
        lines.append(f"# diagnostic: {note}")
    for table in plan.schema.tables.values():
        for col in table.columns:
            t = plan.targets[col.ref]
            lines.append(f"# column {col.ref} distinct {t.distinct_out} nulls {t.nulls_out}{' fixed' if t.fixed else ''}")
            for iv in plan.intervals.get(col.ref, []):
                lines.append(f"{col.ref} [{iv.lo},{iv.hi}] {iv.tag} {iv.width}")
    return "\n".join(lines) + "\n"


def parse_plan_report(text: str) -> dict[ColumnRef, list[Interval]]:
    """Interval lines of a plan report, per column."""
    out: dict[ColumnRef, list[Interval]] = {}
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        ref, bounds, tag, width = line.split(" ")
        lo, hi = bounds.strip("[]").split(",")
        iv = Interval(int(lo), int(hi), tag)
        if iv.width != int(width):
            raise ValueError(f"inconsistent width in plan line {line!r}")
        out.setdefault(ColumnRef.parse(ref), []).append(iv)
    return out
