"""Enumeration oracle and the statistics behind the distributional checks."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import chisquare

from . import _kernels as K
from .errors import TooLarge
from .formula import Formula, as_rng
from .params import Params
from .rejection import RejectionBudget, rejection_sample_many

BRUTE_CAP = 26
_CHUNK = 1 << 18

HALT_CODES = (K.HALT_RECURSING, K.HALT_SAMPLING, K.STEP_BUDGET)
SITE_NAMES = {K.HALT_RECURSING: "recursing", K.HALT_SAMPLING: "sampling", K.STEP_BUDGET: "budget"}


def solution_keys(f: Formula, cap: int = BRUTE_CAP) -> np.ndarray:
    """All solutions as packed integers (variable 1 is the top bit), ascending."""
    if f.n > cap:
        raise TooLarge(f"brute force limited to {cap} variables, formula has {f.n}")
    n = f.n
    lits = [(np.array([n - lit.variable_index for lit in c.literals], dtype=np.int64),
             np.array([0 if lit.negated else 1 for lit in c.literals], dtype=np.int64)) for c in f.clauses]
    found = []
    total = 1 << n
    for start in range(0, total, _CHUNK):
        x = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        ok = np.ones(x.shape, dtype=bool)
        for shifts, want in lits:
            bits = (x[:, None] >> shifts[None, :]) & 1
            ok &= (bits == want[None, :]).any(axis=1)
        found.append(x[ok])
    return np.concatenate(found) if found else np.zeros(0, np.int64)


def unpack_key(key: int, n: int) -> tuple[int, ...]:
    return tuple((int(key) >> (n - 1 - i)) & 1 for i in range(n))


def brute_force_solutions(f: Formula, cap: int = BRUTE_CAP) -> list[tuple[int, ...]]:
    """Every satisfying assignment, lexicographic with variable 1 most significant."""
    return [unpack_key(x, f.n) for x in solution_keys(f, cap)]


@dataclass
class SolutionHistogram:
    counts: Counter = field(default_factory=Counter)  # packed solution -> count
    total: int = 0
    halts: int = 0
    non_solutions: int = 0

    def add(self, keys: np.ndarray, codes: np.ndarray, solutions: set[int] | None = None) -> None:
        keys = np.asarray(keys)
        codes = np.asarray(codes)
        bad = codes[(codes < 0) & ~np.isin(codes, HALT_CODES)]
        if bad.size:
            from .marginal import _raise_code

            _raise_code(int(bad[0]))
        self.total += len(codes)
        self.halts += int(np.isin(codes, HALT_CODES).sum())
        vals, cnt = np.unique(keys[codes == 0], return_counts=True)
        for v, c in zip(vals.tolist(), cnt.tolist()):
            if solutions is not None and v not in solutions:
                self.non_solutions += c
            else:
                self.counts[v] += c

    def merge(self, other: "SolutionHistogram") -> "SolutionHistogram":
        return SolutionHistogram(self.counts + other.counts, self.total + other.total,
                                 self.halts + other.halts, self.non_solutions + other.non_solutions)

    def consistent(self) -> bool:
        return sum(self.counts.values()) + self.halts + self.non_solutions == self.total


class Draws(NamedTuple):
    keys: np.ndarray  # packed assignment, -1 when the run produced none
    codes: np.ndarray  # 0 for a sample, a halt code otherwise


SamplerHandle = Callable[[int, np.random.Generator], Draws]


def recursive_handle(f: Formula, params: Params, sep=None) -> SamplerHandle:
    from .pipeline import Sampler

    sm = Sampler(f, params, sep)

    def run(runs: int, rng) -> Draws:
        b = sm.run_many(runs, rng)
        return Draws(b.keys, b.codes)

    run.sampler = sm
    return run


def rejection_handle(f: Formula, budget: int | None = None) -> SamplerHandle:
    def run(runs: int, rng) -> Draws:
        keys = rejection_sample_many(f, runs, rng, RejectionBudget(budget))
        return Draws(keys, np.zeros(runs, np.int64))

    return run


def tv_from_histogram(hist: SolutionHistogram, solutions: np.ndarray) -> float:
    R = hist.total
    u = 1.0 / len(solutions) if len(solutions) else 0.0
    emp = np.array([hist.counts.get(int(s), 0) for s in solutions], dtype=float) / R
    return 0.5 * (np.abs(emp - u).sum() + (hist.halts + hist.non_solutions) / R)


def noise_radius(hist: SolutionHistogram, solutions: np.ndarray) -> float:
    """Binomial standard errors summed over outcomes; scale of the TV estimate's sampling noise."""
    R = hist.total
    e = np.array([hist.counts.get(int(s), 0) for s in solutions], dtype=float) / R
    h = hist.halts / R
    return 0.5 * float(np.sqrt(e * (1 - e) / R).sum()) + math.sqrt(h * (1 - h) / R)


@dataclass
class DistributionReport:
    tv_estimate: float
    chi_square_stat: float
    p_value: float
    histogram: SolutionHistogram
    n_solutions: int
    halt_rate: float
    noise_radius: float

    def to_json(self) -> dict:
        return {
            "tv_estimate": self.tv_estimate,
            "chi_square": self.chi_square_stat,
            "p_value": self.p_value,
            "halt_rate": self.halt_rate,
            "noise_radius": self.noise_radius,
            "n_solutions": self.n_solutions,
            "runs": self.histogram.total,
            "halts": self.histogram.halts,
            "non_solutions": self.histogram.non_solutions,
        }


def distribution_test(
    sampler: SamplerHandle,
    f: Formula,
    runs: int,
    rng,
    *,
    solutions: np.ndarray | None = None,
    batch: int = 100_000,
) -> DistributionReport:
    """Run `sampler` and compare its output law with uniform over all solutions.

    Halts and non-solutions count fully against the TV estimate. The
    chi-square test uses only the emitted solutions.
    """
    rng = as_rng(rng)
    sols = solution_keys(f) if solutions is None else np.asarray(solutions)
    if runs < 10 * len(sols):
        raise ValueError("runs must be at least 10 times the number of solutions")
    solset = set(sols.tolist())
    hist = SolutionHistogram()
    done = 0
    while done < runs:
        r = min(batch, runs - done)
        d = sampler(r, rng)
        hist.add(d.keys, d.codes, solset)
        done += r
    obs = np.array([hist.counts.get(int(s), 0) for s in sols], dtype=float)
    if len(sols) >= 2 and obs.sum() > 0:
        chi = chisquare(obs)
        stat, pv = float(chi.statistic), float(chi.pvalue)
    else:
        stat, pv = 0.0, 1.0
    return DistributionReport(
        tv_estimate=float(tv_from_histogram(hist, sols)),
        chi_square_stat=stat,
        p_value=pv,
        histogram=hist,
        n_solutions=len(sols),
        halt_rate=hist.halts / hist.total,
        noise_radius=noise_radius(hist, sols),
    )


@dataclass
class HaltReport:
    halt_rate: float
    runs: int
    by_site: dict[str, int]
    depth_hist: dict[int, int]
    con_hist: dict[int, int]
    max_depth: int

    def to_json(self) -> dict:
        return {
            "halt_rate": self.halt_rate,
            "runs": self.runs,
            "by_site": self.by_site,
            "depth_hist": {str(a): b for a, b in sorted(self.depth_hist.items())},
            "con_hist": {str(a): b for a, b in sorted(self.con_hist.items())},
            "max_depth": self.max_depth,
        }


def measure_halt_rate(f: Formula, params: Params, runs: int, rng, sep=None) -> HaltReport:
    """Empirical truncation frequency of the sampler under the report_halt policy."""
    from .marginal import _raise_code
    from .pipeline import Sampler

    rng = as_rng(rng)
    sm = Sampler(f, params, sep)
    if f.n <= 62 and params.leaf_mode == "exact":
        b = sm.run_many(runs, rng)
        codes, depth, con = b.codes, b.depth, b.con
    else:
        codes = np.zeros(runs, np.int64)
        depth = np.zeros(runs, np.int64)
        con = np.zeros(runs, np.int64)
        site_code = {v: k for k, v in SITE_NAMES.items()}
        for r in range(runs):
            rep = sm.run(rng)
            if rep.halt is not None:
                codes[r] = site_code[rep.halt.location]
            depth[r] = rep.counters["max_depth"]
            con[r] = rep.counters["max_con"]
    bad = codes[(codes < 0) & ~np.isin(codes, HALT_CODES)]
    if bad.size:
        _raise_code(int(bad[0]))
    by_site = {name: int((codes == c).sum()) for c, name in SITE_NAMES.items()}
    halts = sum(by_site.values())
    dv, dc = np.unique(depth, return_counts=True)
    cv, cc = np.unique(con, return_counts=True)
    return HaltReport(
        halt_rate=halts / runs,
        runs=runs,
        by_site=by_site,
        depth_hist=dict(zip(dv.tolist(), dc.tolist())),
        con_hist=dict(zip(cv.tolist(), cc.tolist())),
        max_depth=int(depth.max()) if runs else 0,
    )
