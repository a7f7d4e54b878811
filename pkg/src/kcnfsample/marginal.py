"""The tau/nu laws, exact leaf oracles and the recursive marginal sampler.

Two drivers implement MarginSample/MarginOverflow. The `python` driver is a
direct recursive transcription that supports the coin-based leaf and the
debug shadow checks. The `jit` driver is the compiled iterative version in
`_kernels`. With the exact leaf both consume the random stream identically,
so equal seeds give equal outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .errors import (
    BudgetExhausted,
    ComponentTooLarge,
    LocalUniformityViolated,
    SNotUnassigned,
    UnsatisfiableComponent,
)
from .factory import NuFactory
from .formula import ONE, STAR, ZERO, Formula, PartialAssignment, components_under
from .live_state import LiveState, scratch_view

MAX_CAP = 40


@dataclass(frozen=True)
class TauLaw:
    delta: Fraction

    def __post_init__(self):
        d = Fraction(self.delta)
        if not 0 < d <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {d}")
        object.__setattr__(self, "delta", d)

    @property
    def p0(self) -> Fraction:
        return (1 - self.delta) / 2

    @property
    def p1(self) -> Fraction:
        return (1 - self.delta) / 2

    @property
    def p_star(self) -> Fraction:
        return self.delta

    def sample(self, rng: np.random.Generator) -> int:
        # same integer draw as the compiled tau_draw
        num, den = self.delta.numerator, self.delta.denominator
        r = int(rng.integers(0, 2 * den))
        if r < 2 * num:
            return STAR
        return ZERO if r < num + den else ONE


def tau_sample(rng: np.random.Generator, delta) -> int:
    return TauLaw(delta).sample(rng)


@dataclass(frozen=True)
class Halt:
    location: str  # "recursing", "sampling" or "budget"
    con_size: int = 0
    depth: int = 0


def new_stats() -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(K.N_STATS, np.int64), np.array([1.0])


# ------------------------------------------------------------ exact oracles


def _check_cap(cap: int) -> None:
    if not 1 <= cap <= MAX_CAP:
        raise ValueError(f"cap must lie in [1, {MAX_CAP}]")


def count_solutions(f: Formula, cap: int = 26) -> int:
    """Exact number of satisfying assignments of f (all n variables)."""
    _check_cap(cap)
    if f.n > cap:
        raise ComponentTooLarge(f"{f.n} variables exceed the cap {cap}")
    if f.n == 0:
        return 1 if f.m == 0 else 0
    F = K.bind(f)
    sigma = np.full(f.n, K.UNT, np.int8)
    loc = np.full(f.n, -1, np.int32)
    z, _ = K.count_component(
        F, sigma, np.arange(f.n, dtype=np.int32), f.n, np.arange(f.m, dtype=np.int32), f.m, -1, loc
    )
    return int(z)


def marginal_counts(f: Formula, sigma: PartialAssignment, v: int, cap: int = 26) -> tuple[int, int]:
    """(#solutions, #solutions with v = 1) of v's component in the residual formula."""
    _check_cap(cap)
    if not sigma.is_free(v):
        raise SNotUnassigned(f"variable {v} is fixed")
    F = K.bind(f)
    sat = K.sat_flags(F, sigma.states)
    z, z1, nv = K.component_counts(F, sigma.states, sat, v - 1, cap)
    if nv < 0:
        raise ComponentTooLarge(f"component of {v} exceeds {cap} variables")
    return int(z), int(z1)


def exact_marginal(f: Formula, sigma: PartialAssignment, v: int, cap: int = 26) -> Fraction:
    z, z1 = marginal_counts(f, sigma, v, cap)
    if z == 0:
        raise UnsatisfiableComponent(f"component of {v} has no solution")
    return Fraction(z1, z)


def nu_probability(p, delta) -> Fraction:
    """nu(1) = (p - (1-delta)/2)/delta; raises when p is outside [(1-delta)/2, (1+delta)/2]."""
    p, delta = Fraction(p), Fraction(delta)
    nu = (p - (1 - delta) / 2) / delta
    if not 0 <= nu <= 1:
        raise LocalUniformityViolated(f"p={p} outside the window for delta={delta}")
    return nu


# ------------------------------------------------------------- nu leaves


def _raise_code(code: int) -> None:
    if code == K.TOO_LARGE:
        raise ComponentTooLarge("leaf component exceeds the enumeration cap")
    if code == K.UNSAT:
        raise UnsatisfiableComponent("residual component has no solution")
    if code == K.LOCAL_UNIFORMITY:
        raise LocalUniformityViolated("leaf marginal outside [(1-delta)/2, (1+delta)/2]")
    if code == K.BUDGET:
        raise BudgetExhausted("rejection attempts exhausted")
    if code == K.CONTAINMENT:
        raise AssertionError("leaf component is not contained in C_con")
    if code == K.DEPTH_EXCEEDED:
        raise AssertionError("recursion depth exceeded s*k + 1")
    if code == K.NON_SOLUTION:
        raise AssertionError("final assignment violates a clause")
    raise RuntimeError(f"unexpected kernel code {code}")


def coin_source(st: LiveState, v: int, rng, stats=None, budget: int = -1, cap: int = 26):
    """Callable returning i.i.d. exact draws of v's marginal under the current sigma."""
    S, F = st.S, st.F
    stats = stats if stats is not None else new_stats()[0]
    sigma = S.sigma.copy()
    sat = S.sat.copy()

    def coins(count: int) -> np.ndarray:
        out = np.zeros(count, np.int8)
        code = K.component_coins(F, sigma, sat, v - 1, count, rng, budget, stats, cap, out)
        if code < 0:
            _raise_code(code)
        return out

    return coins


@lru_cache(maxsize=64)
def _factory(delta: Fraction, eps: float) -> NuFactory:
    return NuFactory(delta, eps)


def nu_sample(
    st: LiveState,
    v: int,
    delta,
    rng: np.random.Generator,
    leaf_mode: str = "exact",
    *,
    cap: int = 26,
    stats=None,
    fstats=None,
    factory_eps: float = 0.1,
    budget: int = -1,
) -> int:
    """One draw from nu_v^sigma at a leaf (v starred, NextVar empty)."""
    if st.value(v) != STAR:
        raise ValueError(f"variable {v} is not starred")
    _, u = st.con_scan()
    if u is not None:
        raise ValueError("nu_sample called away from a leaf")
    delta = Fraction(delta)
    if stats is not None:
        stats[K.ST_LEAVES] += 1
    if leaf_mode == "factory":
        factory = _factory(delta, factory_eps)
        bit, _ = factory.draw(coin_source(st, v, rng, stats, budget, cap), rng)
        return bit
    if leaf_mode != "exact":
        raise ValueError(f"unknown leaf mode {leaf_mode!r}")
    z, z1, code = K.leaf_counts(st.F, st.S, v - 1, cap)
    if code < 0:
        _raise_code(code)
    if z == 0:
        raise UnsatisfiableComponent(f"component of {v} has no solution")
    if fstats is not None:
        fstats[0] = min(fstats[0], min(z1, z - z1) / z)
    num, den = delta.numerator, delta.denominator
    numer = 2 * den * z1 - (den - num) * z
    total = 2 * num * z
    if numer < 0 or numer > total:
        raise LocalUniformityViolated(f"p={Fraction(z1, z)} outside the window for delta={delta}")
    return ONE if int(rng.integers(0, total)) < numer else ZERO


# ------------------------------------------------------- recursive driver


class _Ctx:
    def __init__(self, st, s, delta, rng, leaf_mode, cap, stats, fstats, max_steps, factory_eps):
        self.st = st
        self.s = s
        self.tau = TauLaw(delta)
        self.delta = Fraction(delta)
        self.rng = rng
        self.leaf_mode = leaf_mode
        self.cap = cap
        self.stats = stats
        self.fstats = fstats
        self.max_steps = max_steps
        self.factory_eps = factory_eps
        self.limit = st.formula.m if s is None else s

    def out_of_steps(self) -> bool:
        st = self.stats
        return self.max_steps > 0 and st[K.ST_TAU] + st[K.ST_ATTEMPTS] >= self.max_steps


def _overflow_py(ctx: _Ctx, v: int, depth: int):
    st, stats = ctx.st, ctx.stats
    while True:
        stats[K.ST_MAXDEPTH] = max(stats[K.ST_MAXDEPTH], depth)
        if ctx.s is not None and depth > ctx.s * st.k + 1:
            raise AssertionError(f"recursion depth {depth} exceeds s*k + 1")
        size, u = st.con_scan(ctx.limit)
        stats[K.ST_NEXTVAR] += 1
        stats[K.ST_MAXCON] = max(stats[K.ST_MAXCON], size)
        if ctx.s is not None and size > ctx.s:
            stats[K.ST_HALT_CON] = size
            stats[K.ST_HALT_DEPTH] = depth
            return Halt("recursing", size, depth)
        if u is None:
            if st.debug:
                _check_leaf_containment(st, v)
            return nu_sample(
                st, v, ctx.delta, ctx.rng, ctx.leaf_mode, cap=ctx.cap,
                stats=stats, fstats=ctx.fstats, factory_eps=ctx.factory_eps,
            )
        if ctx.out_of_steps():
            return Halt("budget", size, depth)
        stats[K.ST_TAU] += 1
        t = ctx.tau.sample(ctx.rng)
        st.assign_var(u, t)
        depth += 1
        if t == STAR:
            stats[K.ST_FRAMES] += 1
            mark = st.checkpoint()
            b = _overflow_py(ctx, u, depth)
            if isinstance(b, Halt):
                return b
            st.rollback(mark)
            st.assign_var(u, b)


def _check_leaf_containment(st: LiveState, v: int) -> None:
    view = scratch_view(st.formula, st.sep, st.sigma, st.eta)
    (vs, cs), = components_under(st.formula, st.sigma, [v])
    if not set(cs) <= set(view["c_con"]):
        raise AssertionError(f"leaf component of {v} leaves C_con")


def margin_overflow(
    st: LiveState,
    v: int,
    s: int | None,
    rng: np.random.Generator,
    *,
    delta,
    leaf_mode: str = "exact",
    cap: int = 26,
    engine: str = "python",
    stats=None,
    fstats=None,
    max_steps: int = 0,
    factory_eps: float = 0.1,
):
    """MarginOverflow on starred v; returns a bit or a Halt and restores st."""
    if st.value(v) != STAR:
        raise ValueError(f"variable {v} is not starred")
    if stats is None or fstats is None:
        stats, fstats = new_stats()
    delta = Fraction(delta)
    if engine == "jit":
        if leaf_mode != "exact":
            raise ValueError("the compiled driver only supports the exact leaf")
        b = K.overflow(
            st.F, st.S, v - 1, rng, delta.numerator, delta.denominator,
            -1 if s is None else s, st.k, cap, stats, fstats, max_steps,
        )
        return _bit_or_halt(b, stats)
    mark = st.checkpoint()
    stats[K.ST_FRAMES] += 1
    ctx = _Ctx(st, s, delta, rng, leaf_mode, cap, stats, fstats, max_steps, factory_eps)
    try:
        return _overflow_py(ctx, v, 0)
    finally:
        st.rollback(mark)


def _bit_or_halt(b: int, stats):
    if b >= 0:
        return int(b)
    if b == K.HALT_RECURSING:
        return Halt("recursing", int(stats[K.ST_HALT_CON]), int(stats[K.ST_HALT_DEPTH]))
    if b == K.HALT_SAMPLING:
        return Halt("sampling", int(stats[K.ST_HALT_CON]), 0)
    if b == K.STEP_BUDGET:
        return Halt("budget")
    _raise_code(b)


def margin_sample(
    st: LiveState,
    v: int,
    s: int | None,
    rng: np.random.Generator,
    *,
    delta,
    leaf_mode: str = "exact",
    cap: int = 26,
    engine: str = "python",
    stats=None,
    fstats=None,
    max_steps: int = 0,
    factory_eps: float = 0.1,
):
    """tau draw for alive v; STAR routes to MarginOverflow. st is left unchanged."""
    if stats is None or fstats is None:
        stats, fstats = new_stats()
    delta = Fraction(delta)
    if engine == "jit":
        if leaf_mode != "exact":
            raise ValueError("the compiled driver only supports the exact leaf")
        b = K.margin_sample(
            st.F, st.S, v - 1, rng, delta.numerator, delta.denominator,
            -1 if s is None else s, st.k, cap, stats, fstats, max_steps,
        )
        return _bit_or_halt(b, stats)
    if st.debug and not st.is_alive(v):
        raise AssertionError(f"margin_sample on variable {v}, which is not alive")
    if max_steps > 0 and stats[K.ST_TAU] + stats[K.ST_ATTEMPTS] >= max_steps:
        return Halt("budget")
    stats[K.ST_TAU] += 1
    t = TauLaw(delta).sample(rng)
    if t != STAR:
        return t
    stats[K.ST_OVERFLOWS] += 1
    mark = st.checkpoint()
    st.assign_var(v, STAR)
    try:
        return margin_overflow(
            st, v, s, rng, delta=delta, leaf_mode=leaf_mode, cap=cap, engine="python",
            stats=stats, fstats=fstats, max_steps=max_steps, factory_eps=factory_eps,
        )
    finally:
        st.rollback(mark)


def margin_sample_counts(st: LiveState, v: int, runs: int, rng, *, delta, s=None, cap: int = 26):
    """Compiled repetition of margin_sample from a fixed state; returns (#1, #0, #halt)."""
    stats, fstats = new_stats()
    delta = Fraction(delta)
    codes = np.zeros(runs, np.int64)
    K.margin_sample_many(
        st.F, st.S, v - 1, runs, rng, delta.numerator, delta.denominator,
        -1 if s is None else s, st.k, cap, stats, fstats, codes,
    )
    errs = codes[(codes < 0) & (codes != K.HALT_RECURSING)]
    if errs.size:
        _raise_code(int(errs[0]))
    return int((codes == 1).sum()), int((codes == 0).sum()), int((codes == K.HALT_RECURSING).sum())
