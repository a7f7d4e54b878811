"""Top-level sampler, regime dispatch, delta certification and counting."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import binomtest

from . import _kernels as K
from .errors import DegenerateMarginal, LocalUniformityViolated
from .formula import Formula, PartialAssignment, as_rng
from .live_state import LiveState
from .marginal import Halt, _raise_code, margin_sample, new_stats
from .params import TYPICAL, Params, params_for
from .rejection import RejectionBudget, rejection_sampling
from .separator import SeparatorPair, construct_sep

FALLBACK_POLICIES = ("fallback", "fallback_rejection")
DEFAULT_GRID = tuple(Fraction(i, 8) for i in range(1, 9))


@dataclass
class RunReport:
    outcome: str  # "sample" or "halt"
    assignment: tuple[int, ...] | None
    halt: Halt | None
    counters: dict
    wall_time: float
    path: str = "recursive"

    def to_json(self) -> dict:
        out = {"outcome": self.outcome, "path": self.path, "counters": self.counters}
        if self.halt is not None:
            out["halt"] = {"location": self.halt.location, "con_size": self.halt.con_size, "depth": self.halt.depth}
        return out


def counters_from(stats: np.ndarray, fstats: np.ndarray) -> dict:
    return {
        "tau_draws": int(stats[K.ST_TAU]),
        "overflow_calls": int(stats[K.ST_OVERFLOWS]),
        "overflow_frames": int(stats[K.ST_FRAMES]),
        "max_depth": int(stats[K.ST_MAXDEPTH]),
        "max_con": int(stats[K.ST_MAXCON]),
        "leaves": int(stats[K.ST_LEAVES]),
        "rejection_attempts": int(stats[K.ST_ATTEMPTS]),
        "next_var_calls": int(stats[K.ST_NEXTVAR]),
        "min_leaf_margin": float(fstats[0]) if fstats[0] < 1 else None,
    }


def _slim(params: Params) -> int:
    return -1 if params.s is None else int(params.s)


@dataclass
class RunBatch:
    keys: np.ndarray
    codes: np.ndarray
    depth: np.ndarray
    con: np.ndarray
    stats: np.ndarray
    fstats: np.ndarray

    @property
    def halts(self) -> np.ndarray:
        return (self.codes == K.HALT_RECURSING) | (self.codes == K.HALT_SAMPLING)


class Sampler:
    """solution_sampling prepared for repeated runs on one formula."""

    def __init__(self, f: Formula, params: Params, sep: SeparatorPair | None = None):
        self.formula = f
        self.params = params
        self.sep = sep if sep is not None else construct_sep(f, None, params.D, params.eta)
        self.state = LiveState(f, self.sep, params.eta)
        self.template = K.new_state(f.n, f.m)
        K.init_state(self.state.F, self.template)

    def _args(self):
        p = self.params
        d = Fraction(p.delta)
        return d.numerator, d.denominator, _slim(p), self.formula.k or 0, p.cap

    def run(self, rng, *, engine: str = "auto", debug: bool = False) -> RunReport:
        p = self.params
        if engine == "auto":
            engine = "jit" if p.leaf_mode == "exact" and not debug else "python"
        rng = as_rng(rng)
        stats, fstats = new_stats()
        t0 = time.perf_counter()
        if engine == "jit":
            dnum, dden, slim, kk, cap = self._args()
            code = K.run_once(
                self.state.F, self.state.S, self.template, rng, dnum, dden, slim, kk, cap,
                p.budget, stats, fstats, p.max_steps,
            )
            S = self.state.S
        else:
            st = LiveState(self.formula, self.sep, p.eta, debug=debug)
            code = self._run_python(st, rng, stats, fstats)
            S = st.S
        wall = time.perf_counter() - t0
        return self._report(code, S, stats, fstats, wall)

    def _run_python(self, st: LiveState, rng, stats, fstats) -> int:
        p = self.params
        for v in range(1, self.formula.n + 1):
            if st.is_alive(v):
                b = margin_sample(
                    st, v, p.s, rng, delta=p.delta, leaf_mode=p.leaf_mode, cap=p.cap,
                    engine="python", stats=stats, fstats=fstats, max_steps=p.max_steps,
                )
                if isinstance(b, Halt):
                    return {"recursing": K.HALT_RECURSING, "budget": K.STEP_BUDGET}[b.location]
                st.assign_var(v, b)
        return K.finish_run(st.F, st.S, rng, _slim(p), p.budget, stats, p.cap)

    def _report(self, code, S, stats, fstats, wall) -> RunReport:
        counters = counters_from(stats, fstats)
        if code == 0:
            bits = tuple(int(x) for x in S.sigma)
            if not self.formula.is_solution(bits):
                raise AssertionError("sampler returned a non-solution")
            return RunReport("sample", bits, None, counters, wall)
        if code == K.HALT_RECURSING:
            halt = Halt("recursing", int(stats[K.ST_HALT_CON]), int(stats[K.ST_HALT_DEPTH]))
        elif code == K.HALT_SAMPLING:
            halt = Halt("sampling", int(stats[K.ST_HALT_CON]), 0)
        elif code == K.STEP_BUDGET:
            halt = Halt("budget")
        elif code == K.UNSAT:
            # tau fixes 0/1 without looking at marginals, so a forced variable can be set wrong
            raise UnsatisfiableComponent(
                "residual component has no solution: the formula is unsatisfiable, or a tau draw "
                f"contradicted a forced variable (delta={self.params.delta} is below this instance's slack)"
            )
        else:
            _raise_code(code)
        return RunReport("halt", None, halt, counters, wall)

    def run_many(self, runs: int, rng) -> RunBatch:
        """Compiled repetition (exact leaf, n <= 62); error codes are kept per run."""
        if self.params.leaf_mode != "exact":
            raise ValueError("run_many requires the exact leaf")
        if self.formula.n > 62:
            raise ValueError("run_many packs solutions and needs n <= 62")
        rng = as_rng(rng)
        stats, fstats = new_stats()
        keys = np.zeros(runs, np.int64)
        codes = np.zeros(runs, np.int64)
        rstats = np.zeros((runs, 2), np.int64)
        dnum, dden, slim, kk, cap = self._args()
        K.run_many(
            self.state.F, self.state.S, self.template, rng, runs, dnum, dden, slim, kk, cap,
            self.params.budget, stats, fstats, keys, codes, rstats, self.params.max_steps,
        )
        return RunBatch(keys, codes, rstats[:, 0], rstats[:, 1], stats, fstats)


def solution_sampling(f: Formula, params: Params, rng, *, engine: str = "auto", debug: bool = False) -> RunReport:
    """One run of the truncated recursive sampler."""
    return Sampler(f, params).run(rng, engine=engine, debug=debug)


def _rejection_report(f: Formula, rng, budget: int, t0: float, halt: Halt | None = None) -> RunReport:
    rb = RejectionBudget(None if budget < 0 else budget)
    out = rejection_sampling(f, PartialAssignment.untouched(f.n), range(1, f.n + 1), rng, rb)
    bits = tuple(out[v] for v in range(1, f.n + 1))
    if not f.is_solution(bits):
        raise AssertionError("rejection sampler returned a non-solution")
    counters = {"rejection_attempts": rb.attempts_used}
    if halt is not None:
        counters["halted_at"] = halt.location
    return RunReport("sample", bits, None, counters, time.perf_counter() - t0, path="rejection")


def sample_with_policy(
    f: Formula,
    eps: float = 0.05,
    seed=None,
    policy: str = "fallback_rejection",
    *,
    params: Params | None = None,
    overrides: dict | None = None,
    rejection_budget: int = -1,
) -> RunReport:
    """Dispatch by regime; on Halt either report it or rerun plain rejection sampling."""
    if policy not in ("report_halt",) + FALLBACK_POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    rng = as_rng(seed)
    p = params if params is not None else params_for(f, eps, overrides=overrides)
    t0 = time.perf_counter()
    if p.regime != TYPICAL:
        return _rejection_report(f, rng, rejection_budget, t0)
    rep = solution_sampling(f, p, rng)
    if rep.outcome == "halt" and policy in FALLBACK_POLICIES:
        fb = _rejection_report(f, rng, rejection_budget, t0, rep.halt)
        fb.counters = {**rep.counters, **fb.counters}
        return fb
    return rep


# ----------------------------------------------------------- certification


@dataclass
class DeltaCertificate:
    delta: Fraction
    min_margin: float  # smallest min(p, 1-p) seen at a leaf
    probe_runs: int
    tried: list = field(default_factory=list)


def _probe_runs(sm: Sampler, runs: int, rng) -> tuple[np.ndarray, float]:
    codes = np.zeros(runs, np.int64)
    low = 1.0
    for r in range(runs):
        try:
            rep = sm.run(rng)
        except LocalUniformityViolated:
            codes[r] = K.LOCAL_UNIFORMITY
            continue
        if rep.halt is not None:
            codes[r] = {"recursing": K.HALT_RECURSING, "sampling": K.HALT_SAMPLING}.get(rep.halt.location, K.STEP_BUDGET)
        m = rep.counters["min_leaf_margin"]
        if m is not None:
            low = min(low, m)
    return codes, low


def certify_delta(
    f: Formula,
    params: Params,
    rng,
    grid=DEFAULT_GRID,
    probe_runs: int = 500,
    slack: float = 0.05,
) -> DeltaCertificate:
    """Smallest grid delta whose probe runs keep every leaf marginal inside the window.

    A candidate passes when no leaf violates local uniformity in `probe_runs`
    untruncated runs, at least one run finishes, and the smallest observed min(p, 1-p) exceeds
    (1-delta)/2 by at least `slack`. delta = 1 always passes since then
    nu equals the marginal itself.
    """
    rng = as_rng(rng)
    tried = []
    for d in sorted(Fraction(x) for x in grid):
        q = params.with_overrides(delta=d, s=None)
        if d == 1:
            tried.append((d, "trivial"))
            return DeltaCertificate(d, 1.0, 0, tried)
        if f.n <= 62:
            batch = Sampler(f, q).run_many(probe_runs, rng)
            codes, low = batch.codes, float(batch.fstats[0])
        else:
            codes, low = _probe_runs(Sampler(f, q), probe_runs, rng)
        errs = codes[(codes < 0) & (codes != K.STEP_BUDGET)]
        if (errs == K.LOCAL_UNIFORMITY).any():
            tried.append((d, "violated"))
            continue
        if errs.size:
            _raise_code(int(errs[0]))
        if not (codes == 0).any():
            tried.append((d, "no probe run finished"))
            continue
        if low - float((1 - d) / 2) < slack:
            tried.append((d, f"margin {low:.4f}"))
            continue
        tried.append((d, "certified"))
        return DeltaCertificate(d, low, probe_runs, tried)
    raise LocalUniformityViolated("no grid value of delta certified")


# ---------------------------------------------------------------- counting


@dataclass
class CountEstimate:
    estimate: float
    log2_estimate: float
    lower: float
    upper: float
    steps: list

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "log2_estimate": self.log2_estimate,
            "lower": self.lower,
            "upper": self.upper,
            "exact_steps": sum(1 for s in self.steps if s["exact"]),
            "steps": len(self.steps),
        }


def _pow2(x: float) -> float:
    try:
        return 2.0**x
    except OverflowError:
        return math.inf


def approx_count(
    f: Formula,
    runs_per_step: int = 10_000,
    eps: float = 0.05,
    seed=None,
    *,
    exact_shortcut: bool = True,
    cap: int = 26,
    budget: int = 10**6,
) -> CountEstimate:
    """Telescoping estimate of the number of solutions.

    Variables are fixed in index order to their majority value; the marginal of
    that value is estimated from `runs_per_step` exact draws of the variable's
    component (or computed exactly under the cap when `exact_shortcut`).
    Bounds use Clopper-Pearson intervals at level 1 - eps/n per step, so they
    hold jointly with probability at least 1 - eps.
    """
    if runs_per_step < 1:
        raise DegenerateMarginal("runs_per_step must be positive")
    rng = as_rng(seed)
    F = K.bind(f)
    sigma = np.full(f.n, K.UNT, np.int8)
    stats = np.zeros(K.N_STATS, np.int64)
    level = 1 - eps / max(f.n, 1)
    log_est = log_lo = log_hi = 0.0
    exact_total = Fraction(1)  # kept while every step is exact, avoids float drift
    steps = []
    for x in range(f.n):
        sat = K.sat_flags(F, sigma)
        z = z1 = -1
        if exact_shortcut:
            z, z1, nv = K.component_counts(F, sigma, sat, x, cap)
            if nv < 0:
                z = -1
        if z == 0:
            return CountEstimate(0.0, -math.inf, 0.0, 0.0, steps)
        if z > 0:
            b = 1 if 2 * z1 >= z else 0
            mu = (z1 if b else z - z1) / z
            lo = hi = mu
            exact = True
            if exact_total is not None:
                exact_total *= Fraction(z, z1 if b else z - z1)
        else:
            out = np.zeros(runs_per_step, np.int8)
            code = K.component_coins(F, sigma, sat, x, runs_per_step, rng, budget, stats, cap, out)
            if code in (K.BUDGET, K.UNSAT):
                return CountEstimate(0.0, -math.inf, 0.0, 0.0, steps)
            c1 = int(out.sum())
            b = 1 if 2 * c1 >= runs_per_step else 0
            cb = c1 if b else runs_per_step - c1
            if cb == 0:
                raise DegenerateMarginal(f"no draws on either side at variable {x + 1}")
            mu = cb / runs_per_step
            ci = binomtest(cb, runs_per_step).proportion_ci(level, method="exact")
            lo, hi = ci.low, ci.high
            exact = False
            exact_total = None
        sigma[x] = b
        log_est -= math.log2(mu)
        log_lo -= math.log2(hi)
        log_hi -= math.log2(lo) if lo > 0 else -math.inf
        steps.append({"var": x + 1, "value": b, "mu": mu, "low": lo, "high": hi, "exact": exact})
    if exact_total is not None:
        v = float(exact_total)
        return CountEstimate(v, math.log2(v), v, v, steps)
    return CountEstimate(_pow2(log_est), log_est, _pow2(log_lo), _pow2(log_hi), steps)
