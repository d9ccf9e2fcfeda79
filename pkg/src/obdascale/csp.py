"""Finite-domain solver for interval-boundary constraint programs.

Variables are integer interval endpoints.  Constraints are unary fixes,
equalities, ``a <= b`` inequalities and linear equalities with unit
coefficients.  Solving runs bounds-consistency propagation to a fixpoint,
then depth-first search: smallest domain first, lowest value first, with
binary ``v = lo`` / ``v > lo`` branching.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

from .errors import SolverBudgetError

DEFAULT_NODE_BUDGET = 200_000


@dataclass(frozen=True)
class CspVariable:
    name: Hashable
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty domain for {self.name}: [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Fix:
    var: Hashable
    value: int


@dataclass(frozen=True)
class Eq:
    a: Hashable
    b: Hashable


@dataclass(frozen=True)
class Le:
    """a <= b"""

    a: Hashable
    b: Hashable


@dataclass(frozen=True)
class LinearEq:
    """sum(coef * var) == rhs"""

    terms: tuple[tuple[int, Hashable], ...]
    rhs: int


@dataclass
class CspProblem:
    variables: list[CspVariable] = field(default_factory=list)
    constraints: list = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        self._index = {v.name: i for i, v in enumerate(self.variables)}

    def add_variable(self, name, lo, hi) -> Hashable:
        if name in self._index:
            raise ValueError(f"duplicate variable {name}")
        self._index[name] = len(self.variables)
        self.variables.append(CspVariable(name, lo, hi))
        return name

    def add(self, constraint) -> None:
        for name in _constraint_vars(constraint):
            if name not in self._index:
                raise ValueError(f"constraint {constraint} references undeclared variable {name}")
        self.constraints.append(constraint)

    def index(self, name) -> int:
        return self._index[name]

    @property
    def free_variables(self) -> list[Hashable]:
        fixed = {c.var for c in self.constraints if isinstance(c, Fix)}
        return [v.name for v in self.variables if v.name not in fixed and v.lo != v.hi]


def _constraint_vars(c):
    if isinstance(c, Fix):
        return (c.var,)
    if isinstance(c, (Eq, Le)):
        return (c.a, c.b)
    if isinstance(c, LinearEq):
        return tuple(v for _, v in c.terms)
    raise TypeError(f"unknown constraint {c!r}")


def verify(problem: CspProblem, assignment: dict) -> list:
    """Constraints violated by ``assignment`` (empty when it is a solution)."""
    bad = []
    for v in problem.variables:
        x = assignment.get(v.name)
        if x is None or not (v.lo <= x <= v.hi):
            bad.append(("domain", v.name))
    if bad:
        return bad
    for c in problem.constraints:
        if isinstance(c, Fix):
            ok = assignment[c.var] == c.value
        elif isinstance(c, Eq):
            ok = assignment[c.a] == assignment[c.b]
        elif isinstance(c, Le):
            ok = assignment[c.a] <= assignment[c.b]
        else:
            ok = sum(k * assignment[v] for k, v in c.terms) == c.rhs
        if not ok:
            bad.append(c)
    return bad


class _Inconsistent(Exception):
    pass


class Solver:
    def __init__(self, problem: CspProblem, node_budget: int = DEFAULT_NODE_BUDGET):
        self.problem = problem
        self.node_budget = node_budget
        self.nodes = 0
        idx = problem.index
        self._lo0 = [v.lo for v in problem.variables]
        self._hi0 = [v.hi for v in problem.variables]
        self._fixes = []
        self._eqs = []
        self._les = []
        self._sums = []
        for c in problem.constraints:
            if isinstance(c, Fix):
                self._fixes.append((idx(c.var), c.value))
            elif isinstance(c, Eq):
                self._eqs.append((idx(c.a), idx(c.b)))
            elif isinstance(c, Le):
                self._les.append((idx(c.a), idx(c.b)))
            else:
                self._sums.append(([(k, idx(v)) for k, v in c.terms], c.rhs))

    def _propagate(self, lo, hi):
        for i, value in self._fixes:
            lo[i] = max(lo[i], value)
            hi[i] = min(hi[i], value)
        changed = True
        while changed:
            changed = False
            for a, b in self._eqs:
                nlo, nhi = max(lo[a], lo[b]), min(hi[a], hi[b])
                if nlo != lo[a] or nlo != lo[b] or nhi != hi[a] or nhi != hi[b]:
                    lo[a] = lo[b] = nlo
                    hi[a] = hi[b] = nhi
                    changed = True
            for a, b in self._les:
                if hi[a] > hi[b]:
                    hi[a] = hi[b]
                    changed = True
                if lo[b] < lo[a]:
                    lo[b] = lo[a]
                    changed = True
            for terms, rhs in self._sums:
                smin = sum(k * lo[i] if k > 0 else k * hi[i] for k, i in terms)
                smax = sum(k * hi[i] if k > 0 else k * lo[i] for k, i in terms)
                if smin > rhs or smax < rhs:
                    raise _Inconsistent
                for k, i in terms:
                    # Bounds of this term given the others' extremes.
                    tmin = k * lo[i] if k > 0 else k * hi[i]
                    tmax = k * hi[i] if k > 0 else k * lo[i]
                    rest_min, rest_max = smin - tmin, smax - tmax
                    t_hi, t_lo = rhs - rest_min, rhs - rest_max
                    if k > 0:
                        nlo, nhi = -(-t_lo // k), t_hi // k
                    else:
                        nlo, nhi = -(-t_hi // k), t_lo // k
                    if nlo > lo[i] or nhi < hi[i]:
                        lo[i], hi[i] = max(lo[i], nlo), min(hi[i], nhi)
                        changed = True
                        smin = sum(kk * lo[j] if kk > 0 else kk * hi[j] for kk, j in terms)
                        smax = sum(kk * hi[j] if kk > 0 else kk * lo[j] for kk, j in terms)
            for i in range(len(lo)):
                if lo[i] > hi[i]:
                    raise _Inconsistent

    def solve(self) -> dict | None:
        """A satisfying assignment, or None when the problem is unsatisfiable."""
        lo, hi = list(self._lo0), list(self._hi0)
        try:
            self._propagate(lo, hi)
        except _Inconsistent:
            return None
        stack = [(lo, hi)]
        while stack:
            lo, hi = stack.pop()
            self.nodes += 1
            if self.nodes > self.node_budget:
                raise SolverBudgetError(
                    f"constraint search exceeded {self.node_budget} nodes{' for ' + self.problem.label if self.problem.label else ''}",
                    cluster=self.problem.label,
                )
            pick, best = -1, None
            for i in range(len(lo)):
                width = hi[i] - lo[i]
                if width and (best is None or width < best):
                    pick, best = i, width
            if pick < 0:
                return {v.name: lo[i] for i, v in enumerate(self.problem.variables)}
            # Push the right branch first so the lowest value is explored first.
            rlo, rhi = list(lo), list(hi)
            rlo[pick] += 1
            try:
                self._propagate(rlo, rhi)
                stack.append((rlo, rhi))
            except _Inconsistent:
                pass
            llo, lhi = list(lo), list(hi)
            lhi[pick] = llo[pick]
            try:
                self._propagate(llo, lhi)
                stack.append((llo, lhi))
            except _Inconsistent:
                pass
        return None


def solve(problem: CspProblem, node_budget: int = DEFAULT_NODE_BUDGET) -> dict | None:
    return Solver(problem, node_budget).solve()


@dataclass
class ClusterContext:
    """Everything needed to place the intervals of columns reachable from a cluster.

    ``intervals`` are inclusive ``(lo, hi)`` address blocks: the cluster's
    Venn-region intervals followed by one extra disjoint block.  ``members``
    maps each cluster column to the indexes of the blocks it owns; ``free``
    maps each column outside the cluster (but FK-connected to it) to its
    target distinct count.  ``fks`` lists ``(child, parent)`` pairs.
    """

    intervals: list[tuple[int, int]]
    members: dict
    free: dict
    fks: list[tuple] = field(default_factory=list)
    label: str = ""

    @property
    def columns(self) -> list:
        return sorted(set(self.members) | set(self.free))


def encode(ctx: ClusterContext) -> CspProblem:
    """Constraint program over lower (X) and exclusive upper (Y) endpoints.

    An interval holding k values is encoded as Y - X = k.
    """
    prob = CspProblem(label=ctx.label)
    cols = ctx.columns
    for i, (lo, hi) in enumerate(ctx.intervals):
        for c in cols:
            prob.add_variable(("X", c, i), lo, hi + 1)
            prob.add_variable(("Y", c, i), lo, hi + 1)
    for i, (lo, hi) in enumerate(ctx.intervals):
        for c, owned in ctx.members.items():
            x, y = ("X", c, i), ("Y", c, i)
            if i in owned:
                prob.add(Fix(x, lo))
                prob.add(Fix(y, hi + 1))
            else:
                prob.add(Eq(x, y))
        for c in cols:
            prob.add(Le(("X", c, i), ("Y", c, i)))
        seen = set()
        for child, parent in ctx.fks:
            if child not in ctx.free and parent not in ctx.free:
                continue
            if (child, parent) in seen:
                continue
            seen.add((child, parent))
            prob.add(Le(("X", parent, i), ("X", child, i)))
            prob.add(Le(("Y", child, i), ("Y", parent, i)))
    for c in cols:
        if c in ctx.free:
            width = ctx.free[c]
        else:
            width = sum(ctx.intervals[i][1] - ctx.intervals[i][0] + 1 for i in ctx.members[c])
        terms = []
        for i in range(len(ctx.intervals)):
            terms.append((1, ("Y", c, i)))
            terms.append((-1, ("X", c, i)))
        prob.add(LinearEq(tuple(terms), width))
    return prob


def decode(ctx: ClusterContext, assignment: dict) -> dict:
    """Inclusive intervals per free column from a solution."""
    out = {}
    for c in ctx.free:
        ints = []
        for i in range(len(ctx.intervals)):
            x, y = assignment[("X", c, i)], assignment[("Y", c, i)]
            if y > x:
                ints.append((x, y - 1))
        out[c] = sorted(ints)
    return out
