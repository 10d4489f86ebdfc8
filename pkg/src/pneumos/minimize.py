"""Exact two-level minimization: Quine-McCluskey prime implicants plus an
exhaustive minimum-cover search.

Cubes are tuples over {0, 1, 2} with 2 meaning "don't care in this
position". Variable counts here are tiny (3 for the shipped device
profile), so exact search is cheap and the result is deterministic:
fewest cubes, then fewest total literals, then lexicographically smallest.
"""
from __future__ import annotations

from itertools import combinations
from typing import Sequence

Cube = tuple[int, ...]


def _to_bits(minterm: int, n: int) -> Cube:
    return tuple((minterm >> (n - 1 - i)) & 1 for i in range(n))


def _merge(a: Cube, b: Cube) -> Cube | None:
    diff = -1
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            if x == 2 or y == 2 or diff >= 0:
                return None
            diff = i
    if diff < 0:
        return None
    return a[:diff] + (2,) + a[diff + 1:]


def covers(cube: Cube, minterm_bits: Cube) -> bool:
    return all(c == 2 or c == m for c, m in zip(cube, minterm_bits))


def literal_count(cube: Cube) -> int:
    return sum(1 for c in cube if c != 2)


def prime_implicants(n_vars: int, on_set: Sequence[int]) -> list[Cube]:
    level = {_to_bits(m, n_vars) for m in on_set}
    primes: set[Cube] = set()
    while level:
        merged: set[Cube] = set()
        used: set[Cube] = set()
        items = sorted(level)
        for a, b in combinations(items, 2):
            c = _merge(a, b)
            if c is not None:
                merged.add(c)
                used.add(a)
                used.add(b)
        primes.update(level - used)
        level = merged
    return sorted(primes)


def minimize(n_vars: int, on_set: Sequence[int]) -> list[Cube]:
    """Minimal sum-of-products cover of the on-set (no don't-cares)."""
    on = sorted(set(on_set))
    if not on:
        return []
    primes = prime_implicants(n_vars, on)
    bits = {m: _to_bits(m, n_vars) for m in on}
    coverage = {p: frozenset(m for m in on if covers(p, bits[m])) for p in primes}

    target = frozenset(on)
    best: list[Cube] | None = None
    for size in range(1, len(primes) + 1):
        candidates = []
        for combo in combinations(primes, size):
            hit = frozenset().union(*(coverage[p] for p in combo))
            if hit == target:
                candidates.append(sorted(combo))
        if candidates:
            best = min(candidates,
                       key=lambda cs: (sum(literal_count(c) for c in cs), cs))
            break
    assert best is not None
    return best


def eval_cubes(cubes: Sequence[Cube], assignment: Sequence[int]) -> int:
    """OR of products under a 0/1 assignment; an empty cover is constant 0."""
    for cube in cubes:
        if all(c == 2 or c == v for c, v in zip(cube, assignment)):
            return 1
    return 0
