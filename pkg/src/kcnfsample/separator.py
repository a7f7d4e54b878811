"""High-degree variables and the separator closure."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .formula import Formula
from .params import as_fraction


@dataclass(frozen=True)
class SeparatorPair:
    v_sep: frozenset[int]
    c_sep: frozenset[int]

    @classmethod
    def empty(cls) -> "SeparatorPair":
        return cls(frozenset(), frozenset())


def overlap_threshold(eta, k: int) -> int:
    """ceil(2*eta*k), computed exactly from a rational view of eta."""
    return math.ceil(2 * as_fraction(eta) * k)


def high_degree(f: Formula, V: Iterable[int], D) -> set[int]:
    D = as_fraction(D)
    return {v for v in V if f.degree(v) >= D}


def construct_sep(
    f: Formula,
    V: Iterable[int] | None,
    D,
    eta,
    order: Sequence[int] | None = None,
) -> SeparatorPair:
    """Least fixed point of the overlap closure seeded with HD(V).

    A clause joins c_sep (and its variables join v_sep) once at least
    ceil(2*eta*k) of its variables are in v_sep. Pending clauses are processed
    by their rank in `order` (default: index order); the result does not
    depend on it.
    """
    if V is None:
        V = range(1, f.n + 1)
    if f.m == 0:
        return SeparatorPair(frozenset(high_degree(f, V, D)), frozenset())
    thr = overlap_threshold(eta, f.k)
    rank = list(range(f.m))
    if order is not None:
        for r, c in enumerate(order):
            rank[c] = r
    occ = f.var_to_clauses
    overlap = [0] * f.m
    queued = [False] * f.m
    v_sep: set[int] = set()
    c_sep: set[int] = set()
    heap: list[tuple[int, int]] = []

    def add_var(v: int) -> None:
        if v in v_sep:
            return
        v_sep.add(v)
        for c in occ[v]:
            overlap[c] += 1
            if overlap[c] >= thr and not queued[c]:
                queued[c] = True
                heapq.heappush(heap, (rank[c], c))

    for v in sorted(high_degree(f, V, D)):
        add_var(v)
    while heap:
        _, c = heapq.heappop(heap)
        c_sep.add(c)
        for v in f.clauses[c].vbl:
            add_var(v)
    return SeparatorPair(frozenset(v_sep), frozenset(c_sep))


def sep_components(f: Formula, v_sep: Iterable[int]) -> list[set[int]]:
    """Connected components of the variable graph H restricted to v_sep."""
    vs = set(v_sep)
    seen: set[int] = set()
    comps = []
    for s in sorted(vs):
        if s in seen:
            continue
        seen.add(s)
        comp = {s}
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for c in f.var_to_clauses[x]:
                for y in f.clauses[c].vbl:
                    if y in vs and y not in seen:
                        seen.add(y)
                        comp.add(y)
                        queue.append(y)
        comps.append(comp)
    return comps


def separator_summary(f: Formula, sep: SeparatorPair) -> dict:
    comps = sep_components(f, sep.v_sep)
    return {
        "v_sep": len(sep.v_sep),
        "c_sep": len(sep.c_sep),
        "v_sep_fraction": len(sep.v_sep) / f.n if f.n else 0.0,
        "largest_component": max((len(c) for c in comps), default=0),
        "components": len(comps),
    }
