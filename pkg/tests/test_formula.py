import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agimstl.errors import IntervalError, STLSyntaxError
from agimstl.formula import (And, Eventually, Globally, Not, Or, Predicate, TrueF, Until, children,
                             horizon, load, parse, subformulae, variables)
from helpers import random_formula


def test_parse_conjunction_of_globals():
    f = parse("G[0,30] (rpm <= 0.8) & G[0,30] (speed <= 0.9)")
    assert f == And((Globally(0, 30, Predicate("rpm", "<=", 0.8)),
                     Globally(0, 30, Predicate("speed", "<=", 0.9))))


def test_parse_double_negation_kept():
    assert parse("!(!(x >= 0.1))") == Not(Not(Predicate("x", ">=", 0.1)))


def test_reversed_interval_rejected():
    with pytest.raises(IntervalError):
        parse("F[5,3] (x >= 0)")


def test_negative_interval_rejected():
    with pytest.raises(IntervalError):
        parse("G[-1,3] (x >= 0)")
    with pytest.raises(IntervalError):
        Eventually(2, 1, TrueF())


def test_chains_flatten_but_groups_nest():
    p, q, r = (Predicate(v, ">=", 0) for v in "pqr")
    assert parse("p >= 0 & q >= 0 & r >= 0") == And((p, q, r))
    assert parse("(p >= 0 & q >= 0) & r >= 0") == And((And((p, q)), r))
    assert parse("p >= 0 | q >= 0 | r >= 0") == Or((p, q, r))


def test_and_binds_tighter_than_or():
    f = parse("a >= 0 | b >= 0 & c >= 0")
    assert isinstance(f, Or) and isinstance(f.children[1], And)


def test_strict_comparisons_alias():
    assert parse("x > 0.5") == Predicate("x", ">=", 0.5)
    assert parse("x < -0.5") == Predicate("x", "<=", -0.5)


def test_until_and_true_parse():
    f = parse("(x >= 0) U[0,2] (y <= 1)")
    assert f == Until(0, 2, Predicate("x", ">=", 0), Predicate("y", "<=", 1))
    assert parse("F[0,1] true") == Eventually(0, 1, TrueF())


def test_comments_and_whitespace():
    f = parse("# limit\nG[0, 1]\n  (x >= 0)  # trailing\n")
    assert f == Globally(0, 1, Predicate("x", ">=", 0))


@pytest.mark.parametrize("text, line, col", [
    ("G[0,1] (x >= )", 1, 14),
    ("x >= 0 &\n  & y >= 0", 2, 3),
    ("x ! 0", 1, 3),
])
def test_syntax_errors_carry_position(text, line, col):
    with pytest.raises(STLSyntaxError) as info:
        parse(text)
    assert (info.value.line, info.value.column) == (line, col)
    assert f"line {line}, column {col}" in str(info.value)


def test_and_needs_two_children():
    with pytest.raises(ValueError):
        And((Predicate("x", ">=", 0),))


def test_horizon_examples():
    p = Predicate("p", ">=", 0)
    assert horizon(Eventually(35, 40, Globally(0, 5, p))) == 45
    assert horizon(Predicate("x", ">=", 0)) == 0
    assert horizon(And((Globally(0, 30, p), Globally(0, 30, Predicate("q", "<=", 0))))) == 30
    assert horizon(Not(Globally(1, 2, p))) == 2


def test_subformulae_preorder():
    p, q = Predicate("p", ">=", 0), Predicate("q", ">=", 0)
    assert subformulae(Not(p)) == [Not(p), p]
    assert subformulae(And((p, q))) == [And((p, q)), p, q]
    assert len(subformulae(Globally(0, 1, Eventually(0, 1, p)))) == 3


def test_variables_and_children():
    f = parse("F[0,1] (x >= 0 & y <= 1) | !(z >= 0)")
    assert variables(f) == {"x", "y", "z"}
    assert len(children(f)) == 2


def test_load_reads_file(tmp_path):
    path = tmp_path / "limit.stl"
    path.write_text("G[0,2] (x <= 0.25)\n", encoding="utf-8")
    assert load(path) == Globally(0, 2, Predicate("x", "<=", 0.25))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_print_parse_round_trip(seed):
    f = random_formula(np.random.default_rng(seed), names=("x", "y", "speed_2"))
    assert parse(str(f)) == f


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_horizon_monotone_in_subformulae(seed):
    f = random_formula(np.random.default_rng(seed))
    for g in subformulae(f):
        for c in children(g):
            assert horizon(c) <= horizon(g)
    assert horizon(f) <= 10.0 + 1e-12
