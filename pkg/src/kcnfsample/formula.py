"""CNF data model, DIMACS I/O, random generation and residual components."""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    ClauseCountMismatch,
    InvalidDimensions,
    MalformedHeader,
    NonUniformWidth,
    SNotUnassigned,
    VariableOutOfRange,
)

# Per-variable states of a partial assignment.
ZERO, ONE, STAR, UNTOUCHED = 0, 1, 2, 3
STATE_NAMES = {ZERO: "0", ONE: "1", STAR: "*", UNTOUCHED: "_"}


def as_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator; pass an existing Generator through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class Literal(NamedTuple):
    variable_index: int
    negated: bool

    @classmethod
    def from_int(cls, lit: int) -> "Literal":
        if lit == 0:
            raise ValueError("0 is not a literal")
        return cls(abs(lit), lit < 0)

    def to_int(self) -> int:
        return -self.variable_index if self.negated else self.variable_index

    def satisfied_by(self, value: int) -> bool:
        return value == (ZERO if self.negated else ONE)


@dataclass(frozen=True)
class Clause:
    literals: tuple[Literal, ...]

    @classmethod
    def from_ints(cls, lits: Iterable[int]) -> "Clause":
        return cls(tuple(Literal.from_int(int(x)) for x in lits))

    @cached_property
    def vbl(self) -> frozenset[int]:
        return frozenset(lit.variable_index for lit in self.literals)

    @property
    def width(self) -> int:
        return len(self.literals)

    def to_ints(self) -> list[int]:
        return [lit.to_int() for lit in self.literals]

    def is_tautology(self) -> bool:
        signs: dict[int, bool] = {}
        for lit in self.literals:
            if signs.setdefault(lit.variable_index, lit.negated) != lit.negated:
                return True
        return False


@dataclass(frozen=True)
class Formula:
    """Immutable width-k CNF over variables 1..n."""

    n: int
    clauses: tuple[Clause, ...]
    k: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 0:
            raise InvalidDimensions(f"n must be non-negative, got {self.n}")
        widths = {c.width for c in self.clauses}
        if len(widths) > 1:
            raise NonUniformWidth(f"mixed clause widths {sorted(widths)}")
        if widths:
            width = widths.pop()
            if width == 0:
                raise NonUniformWidth("empty clause")
            if self.k is not None and self.k != width:
                raise NonUniformWidth(f"declared k={self.k} but clauses have width {width}")
            object.__setattr__(self, "k", width)
        for i, c in enumerate(self.clauses):
            for lit in c.literals:
                if not 1 <= lit.variable_index <= self.n:
                    raise VariableOutOfRange(
                        f"clause {i}: variable {lit.variable_index} outside [1, {self.n}]"
                    )

    @classmethod
    def from_lists(cls, n: int, clauses: Iterable[Sequence[int]], k: int | None = None) -> "Formula":
        return cls(n, tuple(Clause.from_ints(c) for c in clauses), k)

    def as_lists(self) -> list[list[int]]:
        return [c.to_ints() for c in self.clauses]

    @property
    def m(self) -> int:
        return len(self.clauses)

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.m, self.n) if self.n else Fraction(0)

    @cached_property
    def var_to_clauses(self) -> tuple[tuple[int, ...], ...]:
        """Entry v lists the clause indices whose vbl contains v (entry 0 is unused)."""
        occ: list[list[int]] = [[] for _ in range(self.n + 1)]
        for i, c in enumerate(self.clauses):
            for v in sorted(c.vbl):
                occ[v].append(i)
        return tuple(tuple(x) for x in occ)

    def degree(self, v: int) -> int:
        return len(self.var_to_clauses[v])

    def max_degree(self) -> int:
        return max((len(x) for x in self.var_to_clauses[1:]), default=0)

    def is_solution(self, bits: Sequence[int]) -> bool:
        """bits[v-1] is the value of variable v."""
        return all(
            any(lit.satisfied_by(bits[lit.variable_index - 1]) for lit in c.literals)
            for c in self.clauses
        )

    @cached_property
    def arrays(self):
        from ._kernels import formula_arrays

        return formula_arrays(self)


class PartialAssignment:
    """Per-variable states in {ZERO, ONE, STAR, UNTOUCHED}; variables are 1-based."""

    __slots__ = ("states",)

    def __init__(self, states):
        self.states = np.asarray(states, dtype=np.int8).copy()
        if self.states.size and (self.states.min() < 0 or self.states.max() > UNTOUCHED):
            raise ValueError("states must lie in {0, 1, 2, 3}")

    @classmethod
    def untouched(cls, n: int) -> "PartialAssignment":
        return cls(np.full(n, UNTOUCHED, dtype=np.int8))

    @classmethod
    def from_dict(cls, n: int, values: dict[int, int]) -> "PartialAssignment":
        pa = cls.untouched(n)
        for v, s in values.items():
            pa[v] = s
        return pa

    @property
    def n(self) -> int:
        return len(self.states)

    def __getitem__(self, v: int) -> int:
        return int(self.states[v - 1])

    def __setitem__(self, v: int, state: int) -> None:
        if state not in STATE_NAMES:
            raise ValueError(f"bad state {state}")
        self.states[v - 1] = state

    def __eq__(self, other) -> bool:
        return isinstance(other, PartialAssignment) and np.array_equal(self.states, other.states)

    def __repr__(self) -> str:
        return "PartialAssignment(" + "".join(STATE_NAMES[int(s)] for s in self.states) + ")"

    def copy(self) -> "PartialAssignment":
        return PartialAssignment(self.states)

    def is_free(self, v: int) -> bool:
        return self.states[v - 1] >= STAR

    def free_vars(self) -> list[int]:
        """Lambda: the variables in state STAR or UNTOUCHED."""
        return [int(i) + 1 for i in np.flatnonzero(self.states >= STAR)]

    def satisfies(self, clause: Clause) -> bool:
        return any(lit.satisfied_by(int(self.states[lit.variable_index - 1])) for lit in clause.literals)


# ---------------------------------------------------------------- DIMACS


def parse_dimacs(text) -> Formula:
    """Read DIMACS CNF from a string or text stream."""
    if not isinstance(text, str):
        text = text.read()
    header = None
    tokens: list[int] = []
    for lineno, raw in enumerate(io.StringIO(text), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            parts = line.split()
            if header is not None or len(parts) != 4 or parts[1] != "cnf":
                raise MalformedHeader(f"line {lineno}: {line!r}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise MalformedHeader(f"line {lineno}: {line!r}") from None
            if header[0] < 0 or header[1] < 0:
                raise MalformedHeader(f"line {lineno}: negative count")
            continue
        if header is None:
            raise MalformedHeader(f"line {lineno}: clause data before header")
        try:
            tokens.extend(int(t) for t in line.split())
        except ValueError:
            raise MalformedHeader(f"line {lineno}: non-integer token") from None
    if header is None:
        raise MalformedHeader("missing 'p cnf' header")
    n, m = header
    clauses: list[list[int]] = []
    cur: list[int] = []
    for t in tokens:
        if t == 0:
            clauses.append(cur)
            cur = []
        else:
            if abs(t) > n:
                raise VariableOutOfRange(f"literal {t} exceeds n={n}")
            cur.append(t)
    if cur:
        clauses.append(cur)
    if len(clauses) != m:
        raise ClauseCountMismatch(f"header declares {m} clauses, found {len(clauses)}")
    if len({len(c) for c in clauses}) > 1:
        raise NonUniformWidth(f"mixed clause widths {sorted({len(c) for c in clauses})}")
    return Formula.from_lists(n, clauses)


def write_dimacs(f: Formula) -> str:
    out = [f"p cnf {f.n} {f.m}\n"]
    out.extend(" ".join(map(str, c.to_ints())) + " 0\n" for c in f.clauses)
    return "".join(out)


def generate_random_kcnf(k: int, n: int, m: int, seed=None) -> Formula:
    """Each of the k*m literals is uniform over the 2n signed variables."""
    if k < 1 or n < 1 or m < 0:
        raise InvalidDimensions(f"need k >= 1, n >= 1, m >= 0 (got k={k}, n={n}, m={m})")
    rng = as_rng(seed)
    draws = rng.integers(0, 2 * n, size=(m, k))
    var = draws // 2 + 1
    lits = np.where(draws % 2 == 1, -var, var)
    return Formula.from_lists(n, lits.tolist(), k=k)


# ------------------------------------------------------------ components


def components_under(f: Formula, sigma: PartialAssignment, S: Iterable[int]):
    """Connected components of the residual formula that meet S.

    Clauses satisfied by sigma are dropped; two remaining clauses are adjacent
    when they share a variable in Lambda(sigma). Returns a list of
    (sorted variable list, sorted clause-index list), ordered by the smallest
    variable of S they contain.
    """
    targets = sorted(set(S))
    for v in targets:
        if not sigma.is_free(v):
            raise SNotUnassigned(f"variable {v} is fixed to {sigma[v]}")
    occ = f.var_to_clauses
    live = [not sigma.satisfies(c) for c in f.clauses]
    seen_var: set[int] = set()
    seen_cl: set[int] = set()
    comps = []
    for v in targets:
        if v in seen_var:
            continue
        seen_var.add(v)
        vs, cs = [v], []
        queue = deque([v])
        while queue:
            x = queue.popleft()
            for ci in occ[x]:
                if not live[ci] or ci in seen_cl:
                    continue
                seen_cl.add(ci)
                cs.append(ci)
                for y in f.clauses[ci].vbl:
                    if y not in seen_var and sigma.is_free(y):
                        seen_var.add(y)
                        vs.append(y)
                        queue.append(y)
        comps.append((sorted(vs), sorted(cs)))
    return comps
