"""Acceptance suite: one test per criterion, each recording a one-line detail.

The terminal summary (see conftest.py) prints a pass/fail line per criterion.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from _instances import leaf_fixture, overflow_fixture, pinned, recursive_params, small_sat_instances
from kcnfsample import _kernels as K
from kcnfsample.errors import KcnfError, LocalUniformityViolated
from kcnfsample.formula import ONE, STAR, UNTOUCHED, ZERO, generate_random_kcnf
from kcnfsample.live_state import LiveState
from kcnfsample.marginal import exact_marginal, margin_overflow, margin_sample_counts, new_stats, nu_probability, nu_sample
from kcnfsample.params import desk_overrides, params_for
from kcnfsample.pipeline import DEFAULT_GRID, Sampler, approx_count, certify_delta
from kcnfsample.marginal import count_solutions
from kcnfsample.separator import construct_sep
from kcnfsample.structure_checks import HOLDS, PROPERTY_IDS, VIOLATED, check_property, recheck
from kcnfsample.verify import distribution_test, measure_halt_rate, recursive_handle, rejection_handle, unpack_key

HALF = Fraction(1, 2)
ERROR_CODES = (K.DEPTH_EXCEEDED, K.CONTAINMENT, K.NON_SOLUTION)
FACTORY_EPS = 0.1


def _within(count, runs, p, z=3.0):
    p = float(p)
    return abs(count - runs * p) <= z * math.sqrt(runs * p * (1 - p))


def _screen(draw, p, runs, confirm_runs):
    """3 sigma screen at `runs`; a miss counts only if a fresh, larger batch also misses.

    Over hundreds of probes a correct sampler leaves 3 sigma about 0.27% of
    the time, so a lone screen miss is retested before it is reported.
    Returns (screen_missed, confirmed_missed).
    """
    if _within(draw(runs), runs, p):
        return False, False
    return True, not _within(draw(confirm_runs), confirm_runs, p)


@pytest.fixture(scope="module")
def instances():
    return small_sat_instances(50, 2024)


@pytest.fixture(scope="module")
def certified(instances):
    """Untruncated desk parameters with certified delta, one per instance."""
    rng = np.random.default_rng(5)
    return [recursive_params(f, rng) for f, _ in instances]


def _state(f, q):
    return LiveState(f, construct_sep(f, None, q.D, q.eta), q.eta)


def _partial_from_solution(st, bits, rng, frac):
    """Assign a random share of the alive variables to their values in `bits`."""
    for v in st.alive_vars():
        if st.value(v) == UNTOUCHED and st.is_alive(v) and rng.random() < frac:
            st.assign_var(v, bits[v - 1])


# -- 1


def test_criterion_01_rejection_uniform(instances, record_property):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_p, worst_tv = 1.0, 0.0
    for f, sols in instances:
        rep = distribution_test(rejection_handle(f), f, 100_000, rng, solutions=sols)
        worst_p, worst_tv = min(worst_p, rep.p_value), max(worst_tv, rep.tv_estimate)
    wall = time.perf_counter() - t0
    record_property("detail", f"50 instances, min p={worst_p:.4f}, max TV={worst_tv:.4f}, {wall:.0f}s")
    assert worst_p > 1e-3 and worst_tv <= 0.02 and wall <= 300


# -- 2


def test_criterion_02_recursive_uniform(instances, certified, record_property):
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst_p, worst_tv, deltas = 1.0, 0.0, []
    for (f, sols), q in zip(instances, certified):
        assert q.s is None
        deltas.append(q.delta)
        rep = distribution_test(recursive_handle(f, q), f, 100_000, rng, solutions=sols)
        assert rep.halt_rate == 0 and rep.histogram.non_solutions == 0
        worst_p, worst_tv = min(worst_p, rep.p_value), max(worst_tv, rep.tv_estimate)
    wall = time.perf_counter() - t0
    record_property(
        "detail",
        f"50 instances, delta in [{min(deltas)}, {max(deltas)}], min p={worst_p:.4f}, max TV={worst_tv:.4f}, {wall:.0f}s",
    )
    assert worst_p > 1e-3 and worst_tv <= 0.02 and wall <= 900


# -- 3


def test_criterion_03_margin_sample(instances, certified, record_property):
    rng = np.random.default_rng(303)
    runs, probes, misses, screen_misses, at_one = 10_000, 0, 0, 0, 0
    i = 0
    while probes < 200:
        (f, sols), q = instances[i % 50], certified[i % 50]
        i += 1
        st = _state(f, q)
        bits = unpack_key(int(rng.choice(sols)), f.n)
        _partial_from_solution(st, bits, rng, rng.uniform(0, 0.6))
        alive = [v for v in st.alive_vars() if st.value(v) == UNTOUCHED]
        if not alive:
            continue
        v = int(rng.choice(alive))
        p = exact_marginal(f, st.sigma, v)

        def draw(r, delta):
            ones, zeros, halts = margin_sample_counts(st, v, r, rng, delta=delta)
            assert halts == 0 and ones + zeros == r
            return ones

        probes += 1
        if p in (0, 1):
            misses += draw(runs, 1) != runs * p
            continue
        try:
            screened, confirmed = _screen(lambda r: draw(r, q.delta), p, runs, 1_000_000)
        except LocalUniformityViolated:
            # this sigma leaves the certified window; delta = 1 always fits
            at_one += 1
            screened, confirmed = _screen(lambda r: draw(r, 1), p, runs, 1_000_000)
        screen_misses += screened
        misses += confirmed
    record_property(
        "detail",
        f"{probes} probes at 10^4 runs, {screen_misses} screen misses, {misses} confirmed at 10^6, {at_one} needed delta=1",
    )
    assert misses == 0


# -- 4


def _leaf_probe(f, sols, q, rng):
    """Random leaf state: v starred, frontier settled from a solution."""
    st = _state(f, q)
    bits = unpack_key(int(rng.choice(sols)), f.n)
    _partial_from_solution(st, bits, rng, rng.uniform(0, 0.5))
    alive = [v for v in st.alive_vars() if st.value(v) == UNTOUCHED]
    if not alive:
        return None
    v = int(rng.choice(alive))
    st.assign_var(v, STAR)
    while True:
        _, u = st.con_scan()
        if u is None:
            return st, v
        st.assign_var(u, bits[u - 1])


def test_criterion_04_nu(instances, certified, record_property):
    rng = np.random.default_rng(404)
    st = leaf_fixture()
    checks = []
    for mode, runs in (("exact", 100_000), ("factory", 20_000)):
        hits = sum(nu_sample(st, 1, HALF, rng, mode) for _ in range(runs))
        checks.append(_within(hits, runs, Fraction(5, 6)))
    assert nu_probability(exact_marginal(st.formula, st.sigma, 1), HALF) == Fraction(5, 6)

    probes = misses = screen_misses = no_factory = 0
    i = 0
    while probes < 50:
        (f, sols), q = instances[i % 50], certified[i % 50]
        i += 1
        got = _leaf_probe(f, sols, q, rng)
        if got is None:
            continue
        leaf, v = got
        p = exact_marginal(f, leaf.sigma, v)
        if p in (0, 1):
            continue
        # smallest grid delta from 1/2 up whose window contains p; the factory slows as 1/delta^2
        window = [d for d in DEFAULT_GRID if d >= HALF and (1 - d) / 2 <= p <= (1 + d) / 2]
        # the factory is exact only where nu lies in [eps, 1 - eps]
        built = [d for d in window if FACTORY_EPS <= nu_probability(p, d) <= 1 - FACTORY_EPS]
        probes += 1
        plan = [("exact", window[0], 10_000)]
        if built:
            plan.append(("factory", built[0], 2_000))
        else:
            no_factory += 1
        for mode, delta, runs in plan:

            def draw(r, mode=mode, delta=delta):
                return sum(nu_sample(leaf, v, delta, rng, mode, factory_eps=FACTORY_EPS) for _ in range(r))

            nu = nu_probability(p, delta)
            if nu in (0, 1):
                misses += draw(runs) != runs * nu
                continue
            screened, confirmed = _screen(draw, nu, runs, 100_000)
            screen_misses += screened
            misses += confirmed
    record_property(
        "detail",
        f"fixture nu=5/6 ok={all(checks)}; {probes} random probes ({probes - no_factory} with factory), "
        f"{screen_misses} screen misses, {misses} confirmed at 10^5",
    )
    assert all(checks) and misses == 0


# -- 5


def _s_near_half(f, q, rng, pilot_runs=1_000):
    """Pilot search for an s whose halt rate sits strictly inside (0, 1).

    The halt rate is non-increasing in s, equals 1 at s = 0 and 0 at s = m,
    so a bisection on the pilot rate finds the transition.
    """
    rate = {}

    def pilot(s):
        if s not in rate:
            rate[s] = measure_halt_rate(f, q.with_overrides(s=s), pilot_runs, rng).halt_rate
        return rate[s]

    lo, hi = 0, f.m
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pilot(mid) >= 0.5:
            lo = mid
        else:
            hi = mid
    inside = [s for s in (lo, hi) if 0 < pilot(s) < 1]
    return min(inside, key=lambda s: abs(rate[s] - 0.5)) if inside else None


def test_criterion_05_truncation(instances, certified, record_property):
    rng = np.random.default_rng(505)
    pairs = []
    tried = 0

    def stream():
        yield from zip(instances, certified)
        # most instances have a sharp 1 -> 0 halt transition in s; draw more until 20 pairs
        for f, sols in small_sat_instances(200, 505):
            yield (f, sols), recursive_params(f, rng)

    for (f, sols), q in stream():
        if len(pairs) == 20:
            break
        tried += 1
        s = _s_near_half(f, q, rng)
        if s is None:
            continue
        rep = distribution_test(recursive_handle(f, q.with_overrides(s=s)), f, max(20_000, 20 * len(sols)), rng, solutions=sols)
        if 0 < rep.halt_rate < 1:
            pairs.append((rep.tv_estimate, rep.halt_rate, rep.noise_radius))
    ok = [tv <= h + 3 * r for tv, h, r in pairs]
    slack = min(h + 3 * r - tv for tv, h, r in pairs)
    rates = [h for _, h, _ in pairs]
    record_property(
        "detail", f"{len(pairs)} pairs from {tried} instances, halt rates {min(rates):.3f}..{max(rates):.3f}, min slack {slack:.4f}"
    )
    assert len(pairs) == 20 and all(ok)


# -- 6


def test_criterion_06_depth_bound(instances, certified, record_property):
    rng = np.random.default_rng(606)
    runs_total, worst, failures = 0, -1.0, 0
    for (f, _), q in zip(instances, certified):
        for s in (1, 2, 3, 5, 8):
            b = Sampler(f, q.with_overrides(s=s)).run_many(2_000, rng)
            failures += int(np.isin(b.codes, ERROR_CODES).sum())
            worst = max(worst, float((b.depth - (s * f.k + 1)).max()))
            runs_total += 2_000
    f, st, delta = overflow_fixture()
    for s in (1, 2, 3, 5, 8):
        stats, fstats = new_stats()
        for _ in range(2_000):
            margin_overflow(st, 1, s, rng, delta=delta, engine="jit", stats=stats, fstats=fstats)
        worst = max(worst, float(stats[K.ST_MAXDEPTH] - (s * f.k + 1)))
        runs_total += 2_000
    record_property("detail", f"{runs_total} truncated runs, max(depth - (s*k+1)) = {worst:.0f}, {failures} assertion codes")
    assert worst <= 0 and failures == 0


# -- 7


def _mutate(st, rng, steps):
    f = st.formula
    marks = []
    for _ in range(steps):
        r = rng.random()
        starred = [v for v in range(1, f.n + 1) if st.value(v) == STAR]
        untouched = [v for v in range(1, f.n + 1) if st.value(v) == UNTOUCHED]
        if r < 0.1:
            marks.append(st.checkpoint())
        elif r < 0.2 and marks:
            st.rollback(marks.pop(int(rng.integers(len(marks)))))
            marks = [m for m in marks if m <= st.checkpoint()]
        elif r < 0.35 and starred:
            st.assign_var(int(rng.choice(starred)), int(rng.integers(0, 2)))
        elif untouched:
            st.assign_var(int(rng.choice(untouched)), int(rng.choice([ZERO, ONE, STAR])))
        st.verify_against_scratch()


def test_criterion_07_state_oracle(instances, record_property):
    rng = np.random.default_rng(707)
    formulas = [f for f, _ in instances]
    for _ in range(30):
        k = int(rng.integers(3, 6))
        n = int(rng.integers(17, 41))
        formulas.append(generate_random_kcnf(k, n, int(rng.integers(n // 2, 4 * n)), rng))
    steps = 0
    for f in formulas:
        eta = Fraction(int(rng.integers(1, 4)), 20)
        sep = construct_sep(f, None, int(rng.integers(3, 9)), eta)
        _mutate(LiveState(f, sep, eta), rng, 40)
        steps += 40
    record_property("detail", f"{len(formulas)} instances (n <= 40), {steps} mutation steps, all equal to scratch")
    assert steps >= 1000 and max(f.n for f in formulas) <= 40


# -- 8


def test_criterion_08_separator(record_property):
    rng = np.random.default_rng(808)
    eta = Fraction(1, 5)
    f = generate_random_kcnf(3, 200, 200, 13)
    base = construct_sep(f, None, 7, eta)
    same = sum(construct_sep(f, None, 7, eta, order=[int(c) for c in rng.permutation(f.m)]) == base for _ in range(20))
    nested = 0
    for _ in range(50):
        g = generate_random_kcnf(3, 40, int(rng.integers(20, 80)), rng)
        V1 = [v for v in range(1, g.n + 1) if rng.random() < 0.7]
        V2 = [v for v in V1 if rng.random() < 0.5]
        D = int(rng.integers(2, 8))
        big, small = construct_sep(g, V1, D, eta), construct_sep(g, V2, D, eta)
        nested += small.v_sep <= big.v_sep and small.c_sep <= big.c_sep
    record_property("detail", f"{same}/20 shuffles identical (|V_sep|={len(base.v_sep)}), {nested}/50 nested pairs included")
    assert 0 < len(base.v_sep) < f.n and same == 20 and nested == 50


# -- 9


def test_criterion_09_counting(record_property):
    rng = np.random.default_rng(909)
    good = trials = 0
    ratios = []
    while trials < 100:
        k = int(rng.integers(3, 6))
        n = int(rng.integers(8, 15))
        f = generate_random_kcnf(k, n, int(rng.integers(n, 5 * n)), rng)
        z = count_solutions(f)
        if z == 0:
            continue
        est = approx_count(f, runs_per_step=10_000, seed=int(rng.integers(2**31)), exact_shortcut=False)
        ratios.append(est.estimate / z)
        good += z / 1.2 <= est.estimate <= 1.2 * z
        trials += 1
    record_property("detail", f"{good}/100 within 1.2x, ratio range {min(ratios):.3f}..{max(ratios):.3f}")
    assert good >= 95


# -- 10


def test_criterion_10_structure(record_property):
    verdicts = []
    for pid in PROPERTY_IDS:
        good, bad = pinned(pid)
        rg = check_property(good.formula, pid, good.params, good.mode, np.random.default_rng(good.seed))
        rb = check_property(bad.formula, pid, bad.params, bad.mode, np.random.default_rng(bad.seed))
        verdicts.append((pid, rg.verdict == HOLDS, rb.verdict == VIOLATED and recheck(bad.formula, rb, bad.params)))
    ok = [pid for pid, a, b in verdicts if a and b]
    record_property("detail", f"{len(ok)}/{len(PROPERTY_IDS)} properties: holds/violated with re-verified witness")
    assert len(ok) == len(PROPERTY_IDS)


# -- 11


def test_criterion_11_scaling(record_property):
    """Bounded attempt; fails with the first obstruction met."""
    k, alpha, eps, runs = 5, Fraction(1, 2), 0.05, 3
    rng = np.random.default_rng(1111)
    medians, failure = {}, None
    for n in (1_000, 10_000, 100_000):
        f = generate_random_kcnf(k, n, int(alpha * n), rng)
        ov = {**desk_overrides(k, alpha), "budget": 2_000_000, "max_steps": 2_000_000}
        p = params_for(f, eps, overrides=ov)
        try:
            cert = certify_delta(f, p, rng, grid=DEFAULT_GRID[:-1], probe_runs=runs)
            sm = Sampler(f, p.with_overrides(delta=cert.delta))
            reps = [sm.run(rng) for _ in range(runs)]
        except KcnfError as e:
            failure = f"n={n} s={p.s}: {type(e).__name__}: {e}"
            break
        done = [r.wall_time for r in reps if r.outcome == "sample"]
        if len(done) * 2 <= runs:
            failure = f"n={n} s={p.s}: {runs - len(done)}/{runs} runs halted"
            break
        medians[n] = float(np.median(done))
    ns = sorted(medians)
    growth = [medians[b] / medians[a] for a, b in zip(ns, ns[1:])]
    if failure:
        record_property("detail", f"not attainable here: {failure}")
    else:
        record_property("detail", "median s: " + ", ".join(f"{n}:{medians[n]:.3f}" for n in ns))
    assert failure is None and len(ns) == 3 and all(g <= 15 for g in growth)
