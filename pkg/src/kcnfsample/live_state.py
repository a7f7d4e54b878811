"""Dynamic clause/variable classification used by the marginal sampler.

`LiveState` wraps the compiled counters in `_kernels`. `scratch_view`
recomputes every quantity directly from the definitions in plain Python and
serves as the oracle for the incremental code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


from . import _kernels as K
from .errors import VariableNotUntouched
from .formula import ONE, STAR, UNTOUCHED, ZERO, Formula, PartialAssignment
from .params import as_fraction
from .separator import SeparatorPair


def live_floor(eta, k: int) -> Fraction:
    """t = (2/3 - 2*eta)*k as an exact rational."""
    return (Fraction(2, 3) - 2 * as_fraction(eta)) * k


def frozen_need(eta, k: int) -> int:
    """Integer form of t: live >= t iff live >= ceil(t); frozen iff live <= ceil(t)."""
    return math.ceil(live_floor(eta, k))


@dataclass(frozen=True)
class ClauseFlags:
    satisfied: bool
    frozen: bool
    bad: bool
    starred: bool
    in_sep: bool


class LiveState:
    """Incremental state for one sampling run over a fixed formula and separator."""

    def __init__(self, formula: Formula, sep: SeparatorPair, eta, *, debug: bool = False):
        self.formula = formula
        self.sep = sep
        self.eta = as_fraction(eta)
        self.k = formula.k or 0
        self.need = frozen_need(self.eta, self.k) if formula.m else 0
        self.F = K.bind(formula, sep.v_sep, sep.c_sep, self.need)
        self.S = K.new_state(formula.n, formula.m)
        self.debug = debug
        K.init_state(self.F, self.S)

    @classmethod
    def from_sigma(cls, formula, sep, eta, sigma: PartialAssignment, *, debug=False) -> "LiveState":
        st = cls(formula, sep, eta, debug=debug)
        K.load_sigma(st.F, st.S, sigma.states)
        return st

    # -- state access

    @property
    def sigma(self) -> PartialAssignment:
        return PartialAssignment(self.S.sigma)

    def value(self, v: int) -> int:
        return int(self.S.sigma[v - 1])

    def checkpoint(self) -> int:
        return int(self.S.scal[K.SC_TLEN])

    def rollback(self, mark: int) -> None:
        K.rollback(self.F, self.S, mark)
        if self.debug:
            self.verify_against_scratch()

    def assign_var(self, v: int, value: int, *, check_alive: bool | None = None) -> None:
        """Set v from untouched to 0/1/STAR, or overwrite STAR with 0/1."""
        cur = self.value(v)
        if value not in (ZERO, ONE, STAR):
            raise ValueError(f"cannot assign state {value}")
        if cur == STAR and value in (ZERO, ONE):
            pass
        elif cur != UNTOUCHED:
            raise VariableNotUntouched(f"variable {v} is in state {cur}")
        elif check_alive if check_alive is not None else self.debug:
            if not self.is_alive(v):
                raise AssertionError(f"assigning variable {v}, which is not alive")
        K.assign(self.F, self.S, v - 1, value)
        if self.debug:
            self.verify_against_scratch()

    # -- queries

    def is_alive(self, v: int) -> bool:
        return bool(K.is_alive(self.F, self.S, v - 1))

    def alive_vars(self) -> list[int]:
        return [v for v in range(1, self.formula.n + 1) if self.is_alive(v)]

    def clause_flags(self, c: int) -> ClauseFlags:
        S, F = self.S, self.F
        sat = bool(S.sat[c] > 0)
        frozen = bool(S.frozen[c])
        in_sep = bool(F.sepc[c])
        bad = (not sat) and not frozen and not in_sep and S.uncov[c] == 0
        return ClauseFlags(sat, frozen, bool(bad), bool(S.star[c] > 0), in_sep)

    def con_component(self) -> tuple[frozenset[int], int]:
        size, _ = K.con_scan(self.F, self.S, self.formula.m)
        return frozenset(int(c) for c in self.S.conlist[:size]), int(size)

    def con_scan(self, limit: int | None = None) -> tuple[int, int | None]:
        """(|C_con| capped just above limit, NextVar or None)."""
        lim = self.formula.m if limit is None else limit
        size, u = K.con_scan(self.F, self.S, lim)
        return int(size), (int(u) + 1 if u >= 0 else None)

    def next_var(self) -> int | None:
        return self.con_scan()[1]

    def assumption_holds(self) -> bool:
        """Every unsatisfied non-separator clause keeps at least t live variables."""
        return int(self.S.scal[K.SC_DEFICIT]) == 0

    def counters(self) -> dict:
        S = self.S
        m = self.formula.m
        flags = [self.clause_flags(c) for c in range(m)]
        return {
            "sat": [bool(x > 0) for x in S.sat],
            "live": [int(x) for x in S.live],
            "star": [int(x) for x in S.star],
            "frozen": [f.frozen for f in flags],
            "bad": [f.bad for f in flags],
            "cover": [int(x) for x in S.cover],
            "alive": self.alive_vars(),
            "c_con": sorted(self.con_component()[0]),
            "next_var": self.next_var(),
        }

    def verify_against_scratch(self) -> None:
        got = self.counters()
        want = scratch_view(self.formula, self.sep, self.sigma, self.eta)
        for key, val in want.items():
            if got[key] != val:
                raise AssertionError(f"incremental {key} differs from recomputation: {got[key]} != {val}")


def scratch_view(f: Formula, sep: SeparatorPair, sigma: PartialAssignment, eta) -> dict:
    """Every LiveState quantity recomputed from the definitions."""
    t = live_floor(eta, f.k or 0)
    n, m = f.n, f.m
    lam = {v for v in range(1, n + 1) if sigma.is_free(v)}
    sat = [sigma.satisfies(c) for c in f.clauses]
    live = [len((c.vbl & lam) - sep.v_sep) for c in f.clauses]
    star = [sum(1 for v in c.vbl if sigma[v] == STAR) for c in f.clauses]
    frozen = [not sat[i] and i not in sep.c_sep and live[i] < 1 + t for i in range(m)]
    frozen_vars = set()
    for i in range(m):
        if frozen[i]:
            frozen_vars |= f.clauses[i].vbl
    bad = []
    for i, c in enumerate(f.clauses):
        if sat[i] or frozen[i] or i in sep.c_sep:
            bad.append(False)
            continue
        pending = {v for v in c.vbl - sep.v_sep if sigma[v] == UNTOUCHED}
        bad.append(pending <= frozen_vars)
    cover = [sum(1 for i in f.var_to_clauses[v] if frozen[i]) for v in range(1, n + 1)]

    def alive(v: int) -> bool:
        if sigma[v] != UNTOUCHED or v in sep.v_sep:
            return False
        for i, c in enumerate(f.clauses):
            if i in sep.c_sep or sat[i]:
                continue
            if len(c.vbl & lam - sep.v_sep - {v}) < t:
                return False
        return True

    alive_vars = [v for v in range(1, n + 1) if alive(v)]
    interior = {i for i in range(m) if frozen[i] or bad[i] or i in sep.c_sep}
    c_con: set[int] = set()
    for w in range(1, n + 1):
        if sigma[w] != STAR:
            continue
        c_int = {i for i in interior if w in f.clauses[i].vbl}
        grew = True
        while grew:
            grew = False
            for i in interior - c_int:
                if any(f.clauses[i].vbl & f.clauses[j].vbl & lam for j in c_int):
                    c_int.add(i)
                    grew = True
        c_con |= c_int
        for i in range(m):
            vb = f.clauses[i].vbl
            if w in vb or any(vb & f.clauses[j].vbl & lam for j in c_int):
                c_con.add(i)
    v_con = set()
    for i in c_con:
        v_con |= f.clauses[i].vbl
    cand = [v for v in alive_vars if v in v_con]
    return {
        "sat": sat,
        "live": live,
        "star": star,
        "frozen": frozen,
        "bad": bad,
        "cover": cover,
        "alive": alive_vars,
        "c_con": sorted(c_con),
        "next_var": min(cand) if cand else None,
    }
