"""Component-wise rejection sampling of the residual formula."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels as K
from .errors import BudgetExhausted, SNotUnassigned, TooLarge, UnsatisfiableComponent
from .formula import Formula, PartialAssignment

CLI_BUDGET = 10**6


@dataclass
class RejectionBudget:
    max_attempts_per_component: int | None = None  # None: unbounded
    attempts_used: int = 0

    @property
    def limit(self) -> int:
        return -1 if self.max_attempts_per_component is None else int(self.max_attempts_per_component)


def _targets(sigma: PartialAssignment, S: Iterable[int]) -> np.ndarray:
    targets = sorted(set(S))
    for v in targets:
        if not sigma.is_free(v):
            raise SNotUnassigned(f"variable {v} is fixed to {sigma[v]}")
    return np.asarray([v - 1 for v in targets], dtype=np.int32)


def _raise(code: int) -> None:
    if code == K.BUDGET:
        raise BudgetExhausted("rejection attempts exhausted on a component")
    if code == K.UNSAT:
        raise UnsatisfiableComponent("a component of the residual formula has no solution")
    raise RuntimeError(f"unexpected kernel code {code}")


def rejection_sampling(
    f: Formula,
    sigma: PartialAssignment,
    S: Iterable[int],
    rng: np.random.Generator,
    budget: RejectionBudget | None = None,
    cap: int = 26,
) -> dict[int, int]:
    """Exact draw from the marginal on S of a uniform solution extending sigma.

    STAR and UNTOUCHED variables are both free. Each component meeting S is
    resampled uniformly until it is satisfied; components are visited by
    smallest variable and bits are drawn in ascending variable order.
    """
    budget = budget if budget is not None else RejectionBudget()
    targets = _targets(sigma, S)
    F = K.bind(f)
    sig = sigma.states.copy()
    sat = K.sat_flags(F, sig)
    stats = np.zeros(K.N_STATS, np.int64)
    code = K.reject_targets(F, sig, sat, targets, -1, budget.limit, rng, stats, cap)
    budget.attempts_used += int(stats[K.ST_ATTEMPTS])
    if code < 0:
        _raise(code)
    return {int(x) + 1: int(sig[x]) for x in targets}


def rejection_sample_many(
    f: Formula,
    runs: int,
    rng: np.random.Generator,
    budget: RejectionBudget | None = None,
    cap: int = 26,
) -> np.ndarray:
    """Full uniform solutions, packed as integers with variable 1 as the top bit."""
    if f.n > 62:
        raise TooLarge("packed output supports at most 62 variables")
    budget = budget if budget is not None else RejectionBudget()
    F = K.bind(f)
    sigma0 = np.full(f.n, K.UNT, np.int8)
    sat0 = np.zeros(f.m, np.int32)
    keys = np.zeros(runs, np.int64)
    codes = np.zeros(runs, np.int64)
    stats = np.zeros(K.N_STATS, np.int64)
    K.reject_many(F, sigma0, sat0, np.arange(f.n, dtype=np.int32), runs, rng, budget.limit, stats, cap, keys, codes)
    budget.attempts_used += int(stats[K.ST_ATTEMPTS])
    if (codes < 0).any():
        _raise(int(codes[codes < 0][0]))
    return keys


def unpack(key: int, n: int) -> tuple[int, ...]:
    return tuple((int(key) >> (n - 1 - i)) & 1 for i in range(n))


def acceptance_rate(f: Formula, sigma: PartialAssignment, v: int, attempts: int, rng) -> float:
    """Fraction of uniform proposals on v's component that satisfy it."""
    from .formula import components_under

    (vs, cs), = components_under(f, sigma, [v])
    bits = rng.integers(0, 2, size=(attempts, len(vs)))
    idx = {x: i for i, x in enumerate(vs)}
    ok = np.ones(attempts, dtype=bool)
    for ci in cs:
        sat = np.zeros(attempts, dtype=bool)
        for lit in f.clauses[ci].literals:
            x = lit.variable_index
            if x in idx:
                sat |= bits[:, idx[x]] == (0 if lit.negated else 1)
            elif lit.satisfied_by(sigma[x]):
                sat[:] = True
        ok &= sat
    return float(ok.mean())
