"""Relational schema: tables, typed columns, primary and foreign keys.

The schema document is a small line-oriented text format::

    # comment
    table fields(fid:INTEGER, name:TEXT NULL)
    pk fields(fid)
    fk development_wellbores.fid -> fields.fid
    fixed exploration_wellbores.state
    unique fields.name

Column order in a ``table`` statement fixes the CSV column order.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .errors import ParseError, ValidationError


class Datatype(enum.Enum):
    INTEGER = "INTEGER"
    DECIMAL = "DECIMAL"
    TEXT = "TEXT"
    DATE = "DATE"
    BOOLEAN = "BOOLEAN"

    @property
    def numeric(self) -> bool:
        return self in (Datatype.INTEGER, Datatype.DECIMAL, Datatype.DATE)


class ColumnRef(NamedTuple):
    table: str
    name: str

    def __str__(self):
        return f"{self.table}.{self.name}"

    @classmethod
    def parse(cls, text: str) -> "ColumnRef":
        table, sep, name = text.strip().partition(".")
        if not sep or not table or not name:
            raise ValueError(f"expected <table>.<column>, got {text!r}")
        return cls(table, name)


@dataclass(frozen=True)
class Column:
    table: str
    name: str
    datatype: Datatype
    nullable: bool = False
    fixed_domain_declared: bool = False

    @property
    def ref(self) -> ColumnRef:
        return ColumnRef(self.table, self.name)


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(f"{self.name}.{name}")


@dataclass(frozen=True)
class PrimaryKey:
    table: str
    columns: tuple[str, ...]

    @property
    def refs(self) -> tuple[ColumnRef, ...]:
        return tuple(ColumnRef(self.table, c) for c in self.columns)


@dataclass(frozen=True)
class ForeignKey:
    child: ColumnRef
    parent: ColumnRef


@dataclass
class Schema:
    tables: dict[str, Table]
    primary_keys: dict[str, PrimaryKey] = field(default_factory=dict)
    foreign_keys: list[ForeignKey] = field(default_factory=list)
    unique: frozenset[ColumnRef] = frozenset()

    def __post_init__(self):
        self._closures = None

    def column(self, ref: ColumnRef) -> Column:
        try:
            return self.tables[ref.table].column(ref.name)
        except KeyError:
            raise KeyError(str(ref)) from None

    def has_column(self, ref: ColumnRef) -> bool:
        table = self.tables.get(ref.table)
        return table is not None and ref.name in table.column_names

    def all_columns(self) -> list[Column]:
        return [c for t in self.tables.values() for c in t.columns]

    def fixed_declared(self) -> set[ColumnRef]:
        return {c.ref for c in self.all_columns() if c.fixed_domain_declared}

    def is_unique(self, ref: ColumnRef) -> bool:
        """True when the column alone identifies a row (single-column PK or declared unique)."""
        pk = self.primary_keys.get(ref.table)
        if pk is not None and pk.columns == (ref.name,):
            return True
        return ref in self.unique

    def parents_of(self, ref: ColumnRef) -> list[ColumnRef]:
        return [fk.parent for fk in self.foreign_keys if fk.child == ref]

    def children_of(self, ref: ColumnRef) -> list[ColumnRef]:
        return [fk.child for fk in self.foreign_keys if fk.parent == ref]

    def table_order(self) -> list[str]:
        """Table names with every FK parent table before its children (declaration order otherwise)."""
        deps = {name: set() for name in self.tables}
        for fk in self.foreign_keys:
            if fk.parent.table != fk.child.table:
                deps[fk.child.table].add(fk.parent.table)
        order, done = [], set()

        def visit(name, stack):
            if name in done:
                return
            if name in stack:
                # FK cycle between tables: fall back to declaration order.
                return
            stack.add(name)
            for dep in sorted(deps[name], key=list(self.tables).index):
                visit(dep, stack)
            stack.discard(name)
            done.add(name)
            order.append(name)

        for name in self.tables:
            visit(name, set())
        return order

    def column_order(self) -> list[ColumnRef]:
        """All columns, FK parents before children."""
        refs = [c.ref for c in self.all_columns()]
        pos = {r: i for i, r in enumerate(refs)}
        ordered, done = [], set()

        def visit(ref, stack):
            if ref in done or ref in stack:
                return
            stack.add(ref)
            for parent in sorted(self.parents_of(ref), key=pos.get):
                visit(parent, stack)
            stack.discard(ref)
            done.add(ref)
            ordered.append(ref)

        for ref in refs:
            visit(ref, set())
        return ordered

    # -- FK closure -----------------------------------------------------

    def closures(self) -> dict[ColumnRef, frozenset[ColumnRef]]:
        if self._closures is None:
            parent = {c.ref: c.ref for c in self.all_columns()}

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for fk in self.foreign_keys:
                a, b = find(fk.child), find(fk.parent)
                if a != b:
                    parent[max(a, b)] = min(a, b)
            groups: dict[ColumnRef, set[ColumnRef]] = {}
            for ref in parent:
                groups.setdefault(find(ref), set()).add(ref)
            self._closures = {}
            for members in groups.values():
                frozen = frozenset(members)
                for ref in members:
                    self._closures[ref] = frozen
        return self._closures


def closure_star(schema: Schema, column) -> frozenset[ColumnRef]:
    """Equivalence class of ``column`` under the undirected, transitive FK relation."""
    ref = column.ref if isinstance(column, Column) else ColumnRef(*column)
    if not schema.has_column(ref):
        raise KeyError(str(ref))
    return schema.closures()[ref]


# -- parsing ------------------------------------------------------------

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_TABLE_RE = re.compile(rf"^table\s+({_IDENT})\s*\((.*)\)\s*$", re.IGNORECASE)
_PK_RE = re.compile(rf"^pk\s+({_IDENT})\s*\((.*)\)\s*$", re.IGNORECASE)
_FK_RE = re.compile(r"^fk\s+(.+?)\s*->\s*(.+?)\s*$", re.IGNORECASE)
_COLREF_RE = re.compile(rf"^({_IDENT})\.({_IDENT})$")
_COLDEF_RE = re.compile(rf"^({_IDENT})\s*:\s*([A-Za-z]+)(\s+NULL)?$", re.IGNORECASE)
_SINGLE_RE = re.compile(r"^(fixed|unique)\s+(\S+)\s*$", re.IGNORECASE)


def _colref(text, lineno, source):
    m = _COLREF_RE.match(text.strip())
    if not m:
        raise ParseError(f"expected <table>.<column>, got {text.strip()!r}", lineno, source)
    return ColumnRef(m.group(1), m.group(2))


def _fk_side_is_multi(text):
    return "," in text or "(" in text


def load_schema(text: str, source: str | None = None) -> Schema:
    """Parse and validate a schema document."""
    tables: dict[str, Table] = {}
    pks: dict[str, PrimaryKey] = {}
    fks: list[ForeignKey] = []
    fixed: set[ColumnRef] = set()
    unique: set[ColumnRef] = set()
    coldefs: dict[str, list[tuple[str, Datatype, bool]]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if m := _TABLE_RE.match(line):
            name, body = m.group(1), m.group(2)
            if name in coldefs:
                raise ValidationError(f"duplicate table {name!r}")
            cols = []
            for part in body.split(","):
                cm = _COLDEF_RE.match(part.strip())
                if not cm:
                    raise ParseError(f"bad column definition {part.strip()!r} in table {name}", lineno, source)
                try:
                    dtype = Datatype(cm.group(2).upper())
                except ValueError:
                    raise ParseError(f"unknown datatype {cm.group(2)!r} for {name}.{cm.group(1)}", lineno, source) from None
                if any(c[0] == cm.group(1) for c in cols):
                    raise ValidationError(f"duplicate column {name}.{cm.group(1)}")
                cols.append((cm.group(1), dtype, cm.group(3) is not None))
            coldefs[name] = cols
        elif m := _PK_RE.match(line):
            table = m.group(1)
            cols = tuple(c.strip() for c in m.group(2).split(",") if c.strip())
            if not cols:
                raise ParseError(f"empty primary key for {table}", lineno, source)
            if table in pks:
                raise ValidationError(f"table {table!r} declares more than one primary key")
            pks[table] = PrimaryKey(table, cols)
        elif m := _FK_RE.match(line):
            child_text, parent_text = m.group(1), m.group(2)
            if _fk_side_is_multi(child_text) or _fk_side_is_multi(parent_text):
                raise ValidationError(f"multi-attribute foreign keys unsupported: {line!r}")
            fks.append(ForeignKey(_colref(child_text, lineno, source), _colref(parent_text, lineno, source)))
        elif m := _SINGLE_RE.match(line):
            ref = _colref(m.group(2), lineno, source)
            (fixed if m.group(1).lower() == "fixed" else unique).add(ref)
        else:
            raise ParseError(f"unrecognised statement {line!r}", lineno, source)

    if not coldefs:
        raise ValidationError("no tables")

    for table, cols in coldefs.items():
        tables[table] = Table(
            table,
            tuple(
                Column(table, name, dtype, nullable, ColumnRef(table, name) in fixed)
                for name, dtype, nullable in cols
            ),
        )
    schema = Schema(tables, pks, fks, frozenset(unique))
    validate_schema(schema, fixed)
    return schema


def validate_schema(schema: Schema, fixed: Iterable[ColumnRef] = ()) -> None:
    for ref in list(fixed) + sorted(schema.unique):
        if not schema.has_column(ref):
            raise ValidationError(f"unknown column {ref}")
    for table, pk in schema.primary_keys.items():
        if table not in schema.tables:
            raise ValidationError(f"primary key on unknown table {table!r}")
        if len(set(pk.columns)) != len(pk.columns):
            raise ValidationError(f"primary key of {table} repeats a column")
        for name in pk.columns:
            ref = ColumnRef(table, name)
            if not schema.has_column(ref):
                raise ValidationError(f"primary key column {ref} does not exist")
            if schema.column(ref).nullable:
                raise ValidationError(f"primary key column {ref} is nullable")
    seen = set()
    for fk in schema.foreign_keys:
        for ref in (fk.child, fk.parent):
            if not schema.has_column(ref):
                raise ValidationError(f"foreign key {fk.child} -> {fk.parent}: column {ref} does not exist")
        if fk.child == fk.parent:
            raise ValidationError(f"foreign key {fk.child} references itself")
        if not schema.is_unique(fk.parent):
            raise ValidationError(
                f"foreign key {fk.child} -> {fk.parent}: parent must be a single-column primary key or unique"
            )
        if schema.column(fk.child).datatype != schema.column(fk.parent).datatype:
            raise ValidationError(f"foreign key {fk.child} -> {fk.parent}: datatypes differ")
        if fk.child in seen:
            # Two parents for one child would force an intersection of value spaces.
            raise ValidationError(f"column {fk.child} has more than one foreign key")
        seen.add(fk.child)


def dump_schema(schema: Schema) -> str:
    """Serialize a schema back into the document format."""
    lines = []
    for table in schema.tables.values():
        cols = ", ".join(
            f"{c.name}:{c.datatype.value}{' NULL' if c.nullable else ''}" for c in table.columns
        )
        lines.append(f"table {table.name}({cols})")
    for pk in schema.primary_keys.values():
        lines.append(f"pk {pk.table}({', '.join(pk.columns)})")
    for fk in schema.foreign_keys:
        lines.append(f"fk {fk.child} -> {fk.parent}")
    for c in schema.all_columns():
        if c.fixed_domain_declared:
            lines.append(f"fixed {c.ref}")
    for ref in sorted(schema.unique):
        lines.append(f"unique {ref}")
    return "\n".join(lines) + "\n"


def read_schema(path) -> Schema:
    with open(path, encoding="utf-8") as f:
        return load_schema(f.read(), source=str(path))
