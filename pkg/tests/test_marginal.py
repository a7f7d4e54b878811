from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from _instances import leaf_fixture, overflow_fixture
from kcnfsample import _kernels as K
from kcnfsample.errors import ComponentTooLarge, LocalUniformityViolated, UnsatisfiableComponent
from kcnfsample.factory import NuFactory, hypergeom_weights
from kcnfsample.formula import ONE, STAR, ZERO, Formula, PartialAssignment, generate_random_kcnf
from kcnfsample.live_state import LiveState
from kcnfsample.marginal import (
    Halt,
    TauLaw,
    count_solutions,
    exact_marginal,
    margin_overflow,
    margin_sample,
    margin_sample_counts,
    new_stats,
    nu_probability,
    nu_sample,
    tau_sample,
)
from kcnfsample.separator import SeparatorPair

HALF = Fraction(1, 2)


def _within(count, runs, p, z=3.0):
    p = float(p)
    return abs(count - runs * p) <= z * np.sqrt(runs * p * (1 - p))


# -- tau


def test_tau_law_exact():
    law = TauLaw(Fraction(3, 7))
    assert law.p0 + law.p1 + law.p_star == 1
    assert law.p0 == law.p1 == Fraction(2, 7)
    with pytest.raises(ValueError):
        TauLaw(Fraction(0))


def test_tau_frequencies():
    rng = np.random.default_rng(0)
    runs = 1_000_000
    draws = np.array([tau_sample(rng, HALF) for _ in range(runs)])
    n0, n1, ns = (draws == ZERO).sum(), (draws == ONE).sum(), (draws == STAR).sum()
    assert _within(n0, runs, 0.25) and _within(n1, runs, 0.25) and _within(ns, runs, 0.5)
    assert abs(int(n0) - int(n1)) <= 3 * np.sqrt(runs * 0.5)


def test_tau_deterministic():
    r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
    assert [tau_sample(r1, HALF) for _ in range(50)] == [tau_sample(r2, HALF) for _ in range(50)]


# -- exact oracles


def test_count_solutions_examples():
    assert count_solutions(Formula.from_lists(3, [])) == 8
    assert count_solutions(Formula.from_lists(2, [[1, 2], [-1, 2]])) == 2
    assert count_solutions(Formula.from_lists(1, [[1], [-1]])) == 0
    with pytest.raises(ComponentTooLarge):
        count_solutions(Formula.from_lists(30, []))


def test_count_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        f = generate_random_kcnf(3, 10, int(rng.integers(0, 40)), rng)
        brute = sum(f.is_solution([(x >> i) & 1 for i in range(10)]) for x in range(1024))
        assert count_solutions(f) == brute


def test_exact_marginal_examples():
    u2 = PartialAssignment.untouched(2)
    assert exact_marginal(Formula.from_lists(2, []), u2, 1) == HALF
    assert exact_marginal(Formula.from_lists(2, [[1, 2]]), u2, 1) == Fraction(2, 3)
    assert exact_marginal(Formula.from_lists(2, [[1, 2], [-1, 2]]), u2, 2) == 1
    with pytest.raises(UnsatisfiableComponent):
        exact_marginal(Formula.from_lists(1, [[1], [-1]]), PartialAssignment.untouched(1), 1)


def test_exact_marginal_ignores_other_components():
    f = Formula.from_lists(4, [[1, 2], [3, 4], [-3, -4]])
    g = Formula.from_lists(4, [[1, 2]])
    u4 = PartialAssignment.untouched(4)
    assert exact_marginal(f, u4, 1) == exact_marginal(g, u4, 1) == Fraction(2, 3)


# -- nu


def test_nu_probability():
    for d in (Fraction(1, 8), HALF, Fraction(1)):
        assert nu_probability(HALF, d) == HALF
    assert nu_probability(Fraction(2, 3), HALF) == Fraction(5, 6)
    with pytest.raises(LocalUniformityViolated):
        nu_probability(Fraction(9, 10), HALF)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 64), st.integers(1, 64), st.integers(0, 10**6))
def test_mixture_identity(dn, dd, pn):
    delta = Fraction(min(dn, dd), max(dn, dd))
    lo = (1 - delta) / 2
    p = lo + delta * Fraction(pn, 10**6)
    nu = nu_probability(p, delta)
    assert (1 - delta) / 2 + delta * nu == p
    assert (1 - delta) / 2 + delta * (1 - nu) == 1 - p


def test_nu_sample_exact_fixture():
    st_ = leaf_fixture()
    rng = np.random.default_rng(2)
    runs = 100_000
    hits = sum(nu_sample(st_, 1, HALF, rng) for _ in range(runs))
    assert _within(hits, runs, Fraction(5, 6))


def test_nu_sample_factory_fixture():
    st_ = leaf_fixture()
    rng = np.random.default_rng(3)
    runs = 20_000
    hits = sum(nu_sample(st_, 1, HALF, rng, "factory") for _ in range(runs))
    assert _within(hits, runs, Fraction(5, 6))


@pytest.mark.parametrize("mode", ["exact", "factory"])
def test_nu_at_delta_one_is_marginal(mode):
    st_ = leaf_fixture()
    rng = np.random.default_rng(4)
    runs = 20_000
    hits = sum(nu_sample(st_, 1, Fraction(1), rng, mode) for _ in range(runs))
    p = exact_marginal(st_.formula, st_.sigma, 1)
    assert p == Fraction(2, 3) and _within(hits, runs, p)


def test_nu_sample_requires_leaf():
    f = Formula.from_lists(2, [[1, 2]])
    st_ = LiveState(f, SeparatorPair.empty(), Fraction(1, 3))
    st_.assign_var(1, STAR)
    with pytest.raises(ValueError):
        nu_sample(st_, 1, HALF, np.random.default_rng(0))


def test_nu_sample_window_violation():
    f = Formula.from_lists(3, [[1, 2], [1, -2], [1, 3]])
    st_ = LiveState(f, SeparatorPair(frozenset({2, 3}), frozenset()), Fraction(1, 3))
    st_.assign_var(1, STAR)
    with pytest.raises(LocalUniformityViolated):
        nu_sample(st_, 1, HALF, np.random.default_rng(0))


# -- factory


def test_factory_window_and_target():
    fac = NuFactory(HALF, eps=0.1)
    lo, hi = fac.exact_window()
    assert (lo, hi) == pytest.approx((0.3, 0.7))
    for p in np.linspace(lo, hi, 9):
        assert fac.target(p) == pytest.approx(float(nu_probability(Fraction(p), HALF)))


def test_hypergeom_weights_match_scipy():
    from scipy.stats import hypergeom

    for n, h, d in [(800, 530, 400), (50, 0, 25), (50, 50, 25), (100, 3, 50)]:
        want = hypergeom.pmf(np.arange(d + 1), n, h, d)
        assert np.allclose(hypergeom_weights(n, h, d), want, atol=1e-12)


@pytest.mark.parametrize("p", [0.35, 0.5, 2 / 3])
def test_factory_bernoulli_coins(p):
    fac = NuFactory(HALF)
    rng = np.random.default_rng(5)
    coins = lambda c: (rng.random(c) < p).astype(np.int8)
    runs = 20_000
    hits = sum(fac.draw(coins, rng)[0] for _ in range(runs))
    assert _within(hits, runs, fac.target(p))


# -- margin_sample / margin_overflow


def test_overflow_leaf_is_single_nu_call():
    st_ = leaf_fixture()
    stats, fstats = new_stats()
    b = margin_overflow(st_, 1, None, np.random.default_rng(0), delta=HALF, stats=stats, fstats=fstats)
    assert b in (0, 1)
    assert stats[K.ST_LEAVES] == 1 and stats[K.ST_TAU] == 0


@pytest.mark.parametrize("engine", ["python", "jit"])
def test_s_zero_halts_at_entry(engine):
    st_ = leaf_fixture()
    out = margin_overflow(st_, 1, 0, np.random.default_rng(0), delta=HALF, engine=engine)
    assert isinstance(out, Halt) and out.location == "recursing"
    assert out.con_size == 1 and out.depth == 0


def test_overflow_law_matches_nu():
    f, st_, delta = overflow_fixture()
    nu = nu_probability(exact_marginal(f, st_.sigma, 1), delta)
    rng = np.random.default_rng(6)
    stats, fstats = new_stats()
    runs = 100_000
    ones = sum(margin_overflow(st_, 1, None, rng, delta=delta, engine="jit", stats=stats, fstats=fstats) for _ in range(runs))
    assert stats[K.ST_MAXDEPTH] >= 3
    counts = [runs - ones, ones]
    assert chisquare(counts, [runs * float(1 - nu), runs * float(nu)]).pvalue > 1e-3


def test_python_engine_with_debug_checks():
    f, st_, delta = overflow_fixture()
    dbg = LiveState.from_sigma(f, st_.sep, st_.eta, st_.sigma, debug=True)
    rng = np.random.default_rng(7)
    before = dbg.counters()
    outs = [margin_overflow(dbg, 1, None, rng, delta=delta) for _ in range(150)]
    assert set(outs) <= {0, 1}
    assert dbg.counters() == before


def test_margin_sample_examples():
    f = Formula.from_lists(3, [[1, 2]])
    st_ = LiveState(f, SeparatorPair(frozenset({2}), frozenset()), Fraction(1, 3))
    rng = np.random.default_rng(8)
    runs = 100_000
    ones, zeros, halts = margin_sample_counts(st_, 1, runs, rng, delta=HALF)
    assert halts == 0 and ones + zeros == runs
    assert _within(ones, runs, Fraction(2, 3))
    ones3, _, _ = margin_sample_counts(st_, 3, runs, rng, delta=HALF)
    assert _within(ones3, runs, HALF)


def test_margin_sample_mixture_empirical():
    f, st_, delta = overflow_fixture()
    fresh = LiveState(f, st_.sep, st_.eta)
    rng = np.random.default_rng(9)
    runs = 40_000
    ones, zeros, _ = margin_sample_counts(fresh, 1, runs, rng, delta=delta)
    nu_hat = np.mean([margin_overflow(st_, 1, None, rng, delta=delta, engine="jit") for _ in range(runs)])
    mix = (1 - float(delta)) / 2 + float(delta) * nu_hat
    p = float(exact_marginal(f, fresh.sigma, 1))
    sd = np.sqrt(p * (1 - p) / runs)
    assert abs(ones / runs - mix) <= 3 * np.sqrt(sd**2 + (float(delta) * sd) ** 2)
    assert _within(ones, runs, p)


def test_margin_sample_engines_agree_on_law():
    f, st_, delta = overflow_fixture()
    fresh = LiveState(f, st_.sep, st_.eta)
    rng = np.random.default_rng(10)
    runs = 3_000
    py = sum(margin_sample(fresh, 1, None, rng, delta=delta) for _ in range(runs))
    p = exact_marginal(f, fresh.sigma, 1)
    assert _within(py, runs, p)


def test_truncated_depth_bound():
    f, st_, delta = overflow_fixture()
    rng = np.random.default_rng(11)
    halted = 0
    for s in (1, 2, 3, 5, 8):
        stats, fstats = new_stats()
        outs = [margin_overflow(st_, 1, s, rng, delta=delta, engine="jit", stats=stats, fstats=fstats) for _ in range(2000)]
        halted += sum(isinstance(o, Halt) for o in outs)
        assert stats[K.ST_MAXDEPTH] <= s * f.k + 1
    assert halted > 0


def test_step_budget_halt():
    f, st_, delta = overflow_fixture()
    fresh = LiveState(f, st_.sep, st_.eta)
    rng = np.random.default_rng(0)
    outs = [margin_sample(fresh, 1, None, rng, delta=delta, max_steps=1) for _ in range(200)]
    halts = [o for o in outs if isinstance(o, Halt)]
    # the single step is the first tau draw; any recursion then runs out
    assert halts and all(h.location == "budget" for h in halts)
    assert all(o in (0, 1) for o in outs if not isinstance(o, Halt))
