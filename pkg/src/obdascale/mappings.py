"""Concise OBDA mapping syntax, fixed-domain detection and pre-cluster extraction.

One mapping per line::

    SuspendedWellbore(w(id)) <- exploration_wellbores(id,name,year,state), state='suspended'
    developmentWellboreForField(w(id), f(fid)) <- development_wellbores(id,name,year,fid), fields(fid,fname)

Arguments of a source atom are variables.  A variable named like a column of
the atom's table binds that column; any other name binds the column at the
same position.  A variable shared by two atoms is a join.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .errors import ParseError, ValidationError
from .schema import ColumnRef, Schema, closure_star

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_CALL_RE = re.compile(rf"^({_IDENT})\s*\((.*)\)$", re.DOTALL)
_IDENT_RE = re.compile(rf"^{_IDENT}$")
_FILTER_RE = re.compile(rf"^({_IDENT})\s*=\s*(?:'((?:[^']|'')*)'|(-?[0-9][0-9.]*))$")
_NUMBER_RE = re.compile(r"^-?[0-9][0-9.]*$")


@dataclass(frozen=True)
class Var:
    name: str
    column: ColumnRef

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: str

    def __str__(self):
        return "'" + self.value.replace("'", "''") + "'"


@dataclass(frozen=True)
class Template:
    symbol: str
    args: tuple[Union[Var, Const], ...]

    @property
    def arity(self) -> int:
        return len(self.args)

    def __str__(self):
        return f"{self.symbol}({','.join(str(a) for a in self.args)})"


Term = Union[Template, Var, Const]


@dataclass(frozen=True)
class SourceAtom:
    table: str
    variables: tuple[str, ...]
    columns: tuple[ColumnRef, ...]

    def __str__(self):
        return f"{self.table}({','.join(self.variables)})"


@dataclass(frozen=True)
class Filter:
    var: Var
    value: str
    quoted: bool = True

    def __str__(self):
        if self.quoted:
            return f"{self.var.name}=" + "'" + self.value.replace("'", "''") + "'"
        return f"{self.var.name}={self.value}"


@dataclass(frozen=True)
class MappingAssertion:
    predicate: str
    terms: tuple[Term, ...]
    source_atoms: tuple[SourceAtom, ...]
    filters: tuple[Filter, ...] = ()
    line: int | None = field(default=None, compare=False)

    @property
    def arity(self) -> int:
        return len(self.terms)

    @property
    def is_basic(self) -> bool:
        return len(self.source_atoms) == 1

    def templates(self):
        return [t for t in self.terms if isinstance(t, Template)]

    def __str__(self):
        head = f"{self.predicate}({', '.join(str(t) for t in self.terms)})"
        body = [str(a) for a in self.source_atoms] + [str(f) for f in self.filters]
        return f"{head} <- {', '.join(body)}"


@dataclass(frozen=True)
class PreCluster:
    symbol: str
    position: int
    columns: frozenset[ColumnRef]

    def __str__(self):
        cols = ", ".join(str(c) for c in sorted(self.columns))
        return f"{self.symbol}/{self.position} {{{cols}}}"


def _split_top(text, lineno):
    """Split on commas outside parentheses and quotes."""
    parts, depth, buf, quoted = [], 0, [], False
    i = 0
    while i < len(text):
        ch = text[i]
        if quoted:
            buf.append(ch)
            if ch == "'":
                if i + 1 < len(text) and text[i + 1] == "'":
                    buf.append("'")
                    i += 1
                else:
                    quoted = False
        elif ch == "'":
            quoted = True
            buf.append(ch)
        elif ch == "(":
            depth += 1
            buf.append(ch)
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced ')'", lineno)
            buf.append(ch)
        elif ch == "," and depth == 0:
            parts.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
        i += 1
    if quoted:
        raise ParseError("unterminated string constant", lineno)
    if depth:
        raise ParseError("unbalanced '('", lineno)
    tail = "".join(buf).strip()
    if tail or parts:
        parts.append(tail)
    if any(not p for p in parts):
        raise ParseError("empty element in list", lineno)
    return parts


def _split_arrow(line, lineno):
    quoted = False
    for i, ch in enumerate(line):
        if ch == "'":
            quoted = not quoted
        elif not quoted and line.startswith("<-", i):
            return line[:i].strip(), line[i + 2:].strip()
    raise ParseError("missing '<-'", lineno)


def _unquote(text):
    return text[1:-1].replace("''", "'")


def _atom(text, schema, lineno):
    m = _CALL_RE.match(text)
    if not m:
        raise ParseError(f"expected <table>(<col>,...), got {text!r}", lineno)
    table = m.group(1)
    variables = tuple(_split_top(m.group(2), lineno))
    if not variables:
        raise ParseError(f"atom {table} has no arguments", lineno)
    for v in variables:
        if not _IDENT_RE.match(v):
            raise ParseError(f"bad variable {v!r} in atom {table}", lineno)
    if schema is None:
        return SourceAtom(table, variables, tuple(ColumnRef(table, v) for v in variables))
    if table not in schema.tables:
        raise ValidationError(f"line {lineno}: unknown table {table!r}")
    names = schema.tables[table].column_names
    if len(variables) > len(names):
        raise ValidationError(f"line {lineno}: atom {table} has {len(variables)} arguments, table has {len(names)} columns")
    cols = []
    for pos, v in enumerate(variables):
        cols.append(ColumnRef(table, v if v in names else names[pos]))
    return SourceAtom(table, variables, tuple(cols))


def _bind(name, bindings, lineno):
    if name not in bindings:
        raise ValidationError(f"line {lineno}: unknown column {name!r} (not bound by any source atom)")
    return Var(name, bindings[name][0])


def _term(text, bindings, lineno, allow_template=True):
    if text.startswith("'"):
        if not (len(text) >= 2 and text.endswith("'")):
            raise ParseError(f"bad constant {text!r}", lineno)
        return Const(_unquote(text))
    if _NUMBER_RE.match(text):
        return Const(text)
    m = _CALL_RE.match(text)
    if m:
        if not allow_template:
            raise ParseError(f"nested template {text!r}", lineno)
        args = tuple(_term(a, bindings, lineno, allow_template=False) for a in _split_top(m.group(2), lineno))
        if not args:
            raise ParseError(f"template {m.group(1)} has no arguments", lineno)
        return Template(m.group(1), args)
    if _IDENT_RE.match(text):
        return _bind(text, bindings, lineno)
    raise ParseError(f"bad term {text!r}", lineno)


def parse_mapping_line(line: str, schema: Schema | None = None, lineno: int | None = None) -> MappingAssertion:
    head, body = _split_arrow(line, lineno)
    m = _CALL_RE.match(head)
    if not m:
        raise ParseError(f"bad target {head!r}", lineno)
    predicate = m.group(1)

    atoms, filters_raw = [], []
    for part in _split_top(body, lineno):
        if _FILTER_RE.match(part):
            filters_raw.append(part)
        else:
            atoms.append(_atom(part, schema, lineno))
    if not atoms:
        raise ParseError("mapping has no source atom", lineno)

    bindings: dict[str, list[ColumnRef]] = {}
    for atom in atoms:
        for var, col in zip(atom.variables, atom.columns):
            bindings.setdefault(var, []).append(col)

    raw_terms = _split_top(m.group(2), lineno)
    if len(raw_terms) not in (1, 2):
        raise ParseError(f"target {predicate} must have 1 or 2 terms, got {len(raw_terms)}", lineno)
    terms = tuple(_term(t, bindings, lineno) for t in raw_terms)

    filters = []
    for raw in filters_raw:
        fm = _FILTER_RE.match(raw)
        var = _bind(fm.group(1), bindings, lineno)
        if fm.group(2) is not None:
            filters.append(Filter(var, fm.group(2).replace("''", "'"), True))
        else:
            filters.append(Filter(var, fm.group(3), False))
    return MappingAssertion(predicate, terms, tuple(atoms), tuple(filters), line=lineno)


def parse_mappings(text: str, schema: Schema | None = None) -> list[MappingAssertion]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        out.append(parse_mapping_line(line, schema, lineno))
    return out


def format_mappings(assertions) -> str:
    return "".join(f"{a}\n" for a in assertions)


def read_mappings(path, schema: Schema | None = None) -> list[MappingAssertion]:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ParseError(f"cannot read mappings: {exc}", source=str(path)) from exc
    try:
        return parse_mappings(text, schema)
    except ParseError as exc:
        raise ParseError(str(exc), source=str(path)) from exc


def basic_mappings(assertions) -> list[MappingAssertion]:
    return [a for a in assertions if a.is_basic]


def extract_preclusters(assertions, schema: Schema | None = None) -> list[PreCluster]:
    """One pre-cluster per (template symbol, argument position) over basic mappings."""
    found: dict[tuple[str, int], list[ColumnRef]] = {}
    for a in basic_mappings(assertions):
        for template in a.templates():
            for pos, arg in enumerate(template.args, start=1):
                key = (template.symbol, pos)
                cols = found.setdefault(key, [])
                if isinstance(arg, Var) and arg.column not in cols:
                    cols.append(arg.column)
    out = []
    for (symbol, pos), cols in found.items():
        if not cols:
            continue
        if schema is not None:
            types = {schema.column(c).datatype for c in cols}
            if len(types) > 1:
                names = ", ".join(f"{c}:{schema.column(c).datatype.value}" for c in cols)
                raise ValidationError(f"pre-cluster {symbol}/{pos} mixes datatypes: {names}")
        out.append(PreCluster(symbol, pos, frozenset(cols)))
    return out


def precluster_diagnostics(assertions, preclusters, schema: Schema) -> list[str]:
    """Template columns that occur only in non-basic mappings.

    Such columns are not pre-cluster members; they are planned jointly only if
    the FK closure reaches them from a pre-cluster.
    """
    members = set()
    reach = set()
    for pc in preclusters:
        members |= pc.columns
        for c in pc.columns:
            reach |= closure_star(schema, c)
    notes = []
    seen = set()
    for a in assertions:
        if a.is_basic:
            continue
        for template in a.templates():
            for pos, arg in enumerate(template.args, start=1):
                if not isinstance(arg, Var) or arg.column in members or arg.column in seen:
                    continue
                seen.add(arg.column)
                where = f"{template.symbol}/{pos} in {a.predicate} (line {a.line})"
                if arg.column in reach:
                    notes.append(f"{arg.column} used at {where} only in non-basic mappings; reached via FK closure")
                else:
                    notes.append(f"{arg.column} used at {where} only in non-basic mappings; not planned jointly")
    return notes


def detect_fixed_domain(assertions, schema: Schema | None = None) -> set[ColumnRef]:
    """Columns compared to a constant in some mapping, plus schema ``fixed`` declarations."""
    out = {f.var.column for a in assertions for f in a.filters}
    if schema is not None:
        out |= schema.fixed_declared()
    return out
