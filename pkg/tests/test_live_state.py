from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcnfsample.errors import VariableNotUntouched
from kcnfsample.formula import ONE, STAR, UNTOUCHED, ZERO, Formula, PartialAssignment, generate_random_kcnf
from kcnfsample.live_state import LiveState, frozen_need, live_floor, scratch_view
from kcnfsample.separator import SeparatorPair, construct_sep

ETA = Fraction(1, 5)  # k = 5: t = 4/3, frozen iff live <= 2, alive needs live >= 3
EMPTY = SeparatorPair.empty()


def _state(n, clauses, sigma=None, sep=EMPTY, eta=ETA):
    f = Formula.from_lists(n, clauses)
    if sigma is None:
        return LiveState(f, sep, eta)
    return LiveState.from_sigma(f, sep, eta, PartialAssignment.from_dict(n, sigma))


def test_floor_arithmetic():
    assert live_floor(ETA, 5) == Fraction(4, 3)
    assert frozen_need(ETA, 5) == 2
    assert frozen_need(Fraction(1, 10), 3) == 2
    assert frozen_need(0.1, 3) == 2


def test_empty_formula_all_alive():
    st_ = LiveState(Formula.from_lists(4, []), EMPTY, ETA)
    assert st_.alive_vars() == [1, 2, 3, 4]
    assert st_.next_var() is None
    assert st_.con_component() == (frozenset(), 0)


def test_fresh_wide_clause_is_live():
    st_ = _state(10, [[1, 2, 3, 4, 5], [5, 6, 7, 8, 8]])
    assert st_.counters()["live"] == [5, 4]
    assert not st_.clause_flags(0).frozen and not st_.clause_flags(1).frozen
    assert st_.is_alive(1) and st_.is_alive(6)


def test_alive_boundary():
    # live = 3: assigning one variable still leaves 2 >= 4/3
    st_ = _state(5, [[1, 2, 3, 4, 5]], {1: ZERO, 2: ZERO})
    assert st_.counters()["live"] == [3]
    assert st_.is_alive(3)
    assert not st_.clause_flags(0).frozen
    # live = 2 = ceil(t): frozen, and its variables are not alive
    st_.assign_var(3, ZERO)
    assert st_.clause_flags(0).frozen
    assert not st_.is_alive(4)


def test_satisfied_clause_flags():
    st_ = _state(5, [[1, 2, 3, 4, 5]], {1: ONE})
    fl = st_.clause_flags(0)
    assert fl.satisfied and not fl.frozen and not fl.bad


def test_bad_gadget():
    sigma = {1: ZERO, 2: ZERO, 3: ZERO, 6: STAR, 7: STAR, 8: ZERO, 9: ZERO}
    st_ = _state(9, [[1, 2, 3, 4, 5], [5, 6, 7, 8, 9]], sigma)
    a, b = st_.clause_flags(0), st_.clause_flags(1)
    assert a.frozen and not a.bad
    assert b.bad and not b.frozen and b.starred
    st_.verify_against_scratch()


def test_con_examples():
    st_ = _state(10, [[1, 2, 3, 4, 5], [1, 6, 7, 8, 9], [6, 7, 8, 9, 10]])
    assert st_.con_component() == (frozenset(), 0)
    st_.assign_var(1, STAR)
    assert st_.con_component() == (frozenset({0, 1}), 2)
    assert st_.next_var() == 2
    st_.verify_against_scratch()


def test_next_var_none_when_nothing_alive():
    # variable 1 starred; every other variable of its clause sits in the separator
    sep = SeparatorPair(frozenset({2, 3, 4, 5}), frozenset())
    st_ = _state(5, [[1, 2, 3, 4, 5]], sep=sep)
    st_.assign_var(1, STAR)
    assert st_.con_component()[1] == 1
    assert st_.next_var() is None


def test_assign_guards():
    st_ = _state(5, [[1, 2, 3, 4, 5]])
    st_.assign_var(1, ONE)
    with pytest.raises(VariableNotUntouched):
        st_.assign_var(1, ZERO)
    st_.assign_var(2, STAR)
    st_.assign_var(2, ZERO)
    with pytest.raises(ValueError):
        st_.assign_var(3, UNTOUCHED)


def test_rollback_restores():
    st_ = _state(10, [[1, 2, 3, 4, 5], [1, 6, 7, 8, 9]])
    before = st_.counters()
    mark = st_.checkpoint()
    st_.assign_var(1, STAR)
    st_.assign_var(2, ZERO)
    st_.assign_var(1, ONE)
    st_.rollback(mark)
    assert st_.counters() == before
    assert st_.sigma.free_vars() == list(range(1, 11))


def _random_instance(rng):
    k = int(rng.integers(3, 6))
    n = int(rng.integers(k, 21))
    f = generate_random_kcnf(k, n, int(rng.integers(1, 3 * n)), rng)
    eta = Fraction(int(rng.integers(1, 4)), 20)
    D = int(rng.integers(3, 9))
    return f, construct_sep(f, None, D, eta), eta


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_incremental_matches_scratch(seed):
    rng = np.random.default_rng(seed)
    f, sep, eta = _random_instance(rng)
    st_ = LiveState(f, sep, eta)
    marks = []
    for _ in range(40):
        r = rng.random()
        starred = [v for v in range(1, f.n + 1) if st_.value(v) == STAR]
        untouched = [v for v in range(1, f.n + 1) if st_.value(v) == UNTOUCHED]
        if r < 0.1:
            marks.append(st_.checkpoint())
        elif r < 0.2 and marks:
            st_.rollback(marks.pop(int(rng.integers(len(marks)))))
            marks = [m for m in marks if m <= st_.checkpoint()]
        elif r < 0.35 and starred:
            st_.assign_var(int(rng.choice(starred)), int(rng.integers(0, 2)))
        elif untouched:
            st_.assign_var(int(rng.choice(untouched)), int(rng.choice([ZERO, ONE, STAR])))
        st_.verify_against_scratch()


def _classes(st_):
    m = st_.formula.m
    fl = [st_.clause_flags(c) for c in range(m)]
    return (
        {c for c in range(m) if fl[c].starred},
        {c for c in range(m) if fl[c].frozen},
        {c for c in range(m) if fl[c].bad},
        st_.con_component()[0],
    )


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_alive_runs_monotone_and_keep_floor(seed):
    rng = np.random.default_rng(seed)
    f, sep, eta = _random_instance(rng)
    st_ = LiveState(f, sep, eta, debug=True)
    prev = _classes(st_)
    for _ in range(50):
        alive = st_.alive_vars()
        if not alive:
            break
        st_.assign_var(int(rng.choice(alive)), int(rng.choice([ZERO, ONE, STAR])))
        cur = _classes(st_)
        for a, b in zip(prev, cur):
            assert a <= b
        assert not cur[1] & cur[2]
        assert st_.assumption_holds()
        t = live_floor(eta, f.k)
        live = st_.counters()["live"]
        sat = st_.counters()["sat"]
        for c in range(f.m):
            if c not in sep.c_sep and not sat[c]:
                assert live[c] >= t
        prev = cur


def test_scratch_view_keys():
    f = Formula.from_lists(5, [[1, 2, 3, 4, 5]])
    view = scratch_view(f, EMPTY, PartialAssignment.untouched(5), ETA)
    assert view["alive"] == [1, 2, 3, 4, 5]
    assert view["c_con"] == [] and view["next_var"] is None
