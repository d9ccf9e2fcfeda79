"""Pseudo-random permutations of [1..n] from powers of a primitive root.

With p the smallest prime above n and g a generator of (Z/pZ)*, the powers
g^1, g^2, ..., g^(p-1) visit every residue in [1, p-1] once; dropping those
above n leaves a permutation of [1..n].  Since p < 2n for n > 1, at most
about one residue is skipped per value on average.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

# Deterministic for all n < 3.3e24, which covers 64-bit inputs.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in _MR_WITNESSES:
        if n % q == 0:
            return n == q
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime_above(n: int) -> int:
    """Smallest prime strictly greater than n."""
    if n < 2:
        return 2
    c = n + 1
    if c > 2 and c % 2 == 0:
        c += 1
    while not is_prime(c):
        c += 2
    return c


def prime_factors(m: int) -> list[int]:
    """Distinct prime factors by trial division; O(sqrt(m))."""
    out = []
    d = 2
    while d * d <= m:
        if m % d == 0:
            out.append(d)
            while m % d == 0:
                m //= d
        d += 1 if d == 2 else 2
    if m > 1:
        out.append(m)
    return out


def primitive_root(p: int) -> int:
    """Smallest generator of the multiplicative group modulo the prime p."""
    if p == 2:
        return 1
    phi = p - 1
    factors = prime_factors(phi)
    for g in range(2, p):
        if all(pow(g, phi // q, p) != 1 for q in factors):
            return g
    raise ValueError(f"{p} is not prime")


def derive_seed_exponent(p: int, seed: int, key: str) -> int:
    """Stable per-column starting exponent in [1, p-1]."""
    if p <= 2:
        return 1
    digest = hashlib.blake2b(f"{seed}:{key}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") % (p - 1) + 1


@dataclass(frozen=True)
class PermutationGenerator:
    n: int
    p: int
    g: int
    seed_exponent: int = 1

    @classmethod
    def for_size(cls, n: int, seed_exponent: int = 1) -> "PermutationGenerator":
        if n < 1:
            raise ValueError("permutation size must be at least 1")
        p = next_prime_above(n)
        e = (seed_exponent - 1) % (p - 1) + 1 if p > 2 else 1
        return cls(n, p, primitive_root(p), e)

    @classmethod
    def seeded(cls, n: int, seed: int, key: str) -> "PermutationGenerator":
        p = next_prime_above(n)
        return cls.for_size(n, derive_seed_exponent(p, seed, key))

    def initial_state(self) -> "GeneratorState":
        # One step before g^seed_exponent, so the first advance lands on it.
        return GeneratorState(pow(self.g, self.seed_exponent - 1, self.p), 0)


@dataclass(frozen=True)
class GeneratorState:
    current_power: int
    emitted: int = 0


def stream_next(gen: PermutationGenerator, state: GeneratorState) -> tuple[int, GeneratorState]:
    x, g, p, n = state.current_power, gen.g, gen.p, gen.n
    x = x * g % p
    while x > n:
        x = x * g % p
    return x, GeneratorState(x, state.emitted + 1)


class PermutationCursor:
    """Streaming access to the cyclic permutation sequence of one column.

    Holds one residue and one counter.  Sequential indexes cost O(p/n) group
    operations each; any other index restarts the stream.
    """

    __slots__ = ("gen", "_x", "_next_index")

    def __init__(self, gen: PermutationGenerator):
        self.gen = gen
        self._x = gen.initial_state().current_power
        self._next_index = 0

    def next(self) -> int:
        g, p, n = self.gen.g, self.gen.p, self.gen.n
        x = self._x * g % p
        while x > n:
            x = x * g % p
        self._x = x
        self._next_index += 1
        return x

    def take(self, count: int) -> list[int]:
        g, p, n = self.gen.g, self.gen.p, self.gen.n
        x = self._x
        out = [0] * count
        for i in range(count):
            x = x * g % p
            while x > n:
                x = x * g % p
            out[i] = x
        self._x = x
        self._next_index += count
        return out

    def value(self, index: int) -> int:
        """Element at position ``index mod n`` of the permutation."""
        n = self.gen.n
        if index % n != self._next_index % n:
            self._x = self.gen.initial_state().current_power
            self._next_index = 0
            for _ in range(index % n):
                self.next()
            self._next_index = index
        return self.next()


def cycle_value(gen: PermutationGenerator, index: int, cursor: PermutationCursor | None = None) -> int:
    """The (index mod n)-th element of the permutation."""
    if cursor is None:
        cursor = PermutationCursor(gen)
    return cursor.value(index)
