"""Shared test helpers: seed-table writer and an independent CSP oracle."""

import csv
import itertools
import time
from contextlib import contextmanager

from obdascale.csp import ClusterContext, encode


def write_csv(directory, table, header, rows):
    """Write a seed table; None becomes an empty (NULL) field."""
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / f"{table}.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in row])


def sub_intervals(lo, hi):
    """Every (possibly empty) sub-interval of [lo, hi] as inclusive pairs; None is empty."""
    out = [None]
    for a in range(lo, hi + 1):
        for b in range(a, hi + 1):
            out.append((a, b))
    return out


def width(iv):
    return 0 if iv is None else iv[1] - iv[0] + 1


def contained(child, parent):
    if child is None:
        return True
    return parent is not None and parent[0] <= child[0] and child[1] <= parent[1]


def brute_force_feasible(ctx):
    """Semantic oracle: choose one sub-interval per (free column, block) so that
    widths sum to the target and every FK holds block-wise.  Independent of the
    endpoint encoding; prunes on FKs between already-chosen columns."""
    placed = {}
    for c, owned in ctx.members.items():
        placed[c] = [ctx.intervals[i] if i in owned else None for i in range(len(ctx.intervals))]

    options = {}
    for c, target in ctx.free.items():
        per_block = [sub_intervals(lo, hi) for lo, hi in ctx.intervals]
        options[c] = [combo for combo in itertools.product(*per_block) if sum(map(width, combo)) == target]

    order = sorted(ctx.free)

    def fks_hold(assigned):
        for child, parent in ctx.fks:
            if child in assigned and parent in assigned:
                if not all(contained(a, b) for a, b in zip(assigned[child], assigned[parent])):
                    return False
        return True

    if not fks_hold(placed):
        return False

    def rec(i, assigned):
        if i == len(order):
            return True
        c = order[i]
        for combo in options[c]:
            assigned[c] = list(combo)
            if fks_hold(assigned) and rec(i + 1, assigned):
                return True
            del assigned[c]
        return False

    return rec(0, dict(placed))


def random_context(rng):
    """A small random cluster context with at most 20 free CSP variables."""
    while True:
        ctx = _random_context(rng)
        if len(encode(ctx).free_variables) <= 20:
            return ctx


def _random_context(rng):
    n_blocks = rng.randint(1, 3)
    blocks, cursor = [], 1
    for _ in range(n_blocks):
        w = rng.randint(1, 4)
        blocks.append((cursor, cursor + w - 1))
        cursor += w + rng.randint(0, 1)
    n_members = rng.randint(1, 2)
    n_free = rng.randint(1, 3)
    members = {}
    for m in range(n_members):
        owned = {i for i in range(n_blocks) if rng.random() < 0.5} or {rng.randrange(n_blocks)}
        members[f"m{m}"] = owned
    total = sum(hi - lo + 1 for lo, hi in blocks)
    free = {f"f{k}": rng.randint(0, total) for k in range(n_free)}
    cols = list(members) + list(free)
    rng.shuffle(cols)
    fks = []
    for i, child in enumerate(cols):
        if i == 0 or rng.random() < 0.3:
            continue
        parent = rng.choice(cols[:i])
        if child in members and parent in members:
            continue
        fks.append((child, parent))
    return ClusterContext(blocks, members, free, fks, label="random")


# -- acceptance reporting ---------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


@contextmanager
def criterion(number: int, title: str):
    """Record one acceptance criterion's verdict; the yielded dict collects details."""
    details: dict = {}
    t0 = time.perf_counter()
    try:
        yield details
    except BaseException as exc:
        verdict = f"FAIL {exc.__class__.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        raise
    else:
        verdict = "PASS"
    finally:
        info = " ".join(f"{k}={v}" for k, v in details.items())
        line = f"criterion {number} {verdict} [{time.perf_counter() - t0:.1f}s] {title}" + (f" | {info}" if info else "")
        ACCEPTANCE[number] = line
        print(line)
