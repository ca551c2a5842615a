import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pctcheck.cfg import State, parse_program
from pctcheck.corpus import get_example
from pctcheck.errors import BudgetExceeded, NotClosed, PolicyIncomplete, RegionBudgetExceeded
from pctcheck.semantics import (
    enumerate_region,
    kstep_term_prob_min,
    optimal_policy,
    oracle_term_prob,
    reach_prob,
    region_csv,
    restrict,
    shortest_run_bound,
    simulate,
)

# a demonic choice between a fair coin and a biased one
CHOICE = """
vars x;
init c (x = 0);
terminal t;
loc c : nondet { edge -> fair; edge -> biased; }
loc fair : prob { edge -> t prob: 1/2; edge -> c prob: 1/2; }
loc biased : prob { edge -> t prob: 1/4; edge -> c prob: 3/4; }
"""


def test_geometric_coin_closed_form():
    g = get_example("geom").program
    for k in range(0, 12):
        assert kstep_term_prob_min(g, k) == 1 - Fraction(1, 2 ** k)


def test_rw1d_catalan_values():
    g = get_example("rw1d").program
    expected = {3: Fraction(1, 2), 7: Fraction(5, 8), 11: Fraction(11, 16), 15: Fraction(93, 128)}
    for k, v in expected.items():
        assert kstep_term_prob_min(g, k) == v


def test_demonic_minimum():
    g = parse_program(CHOICE)
    # two steps: the scheduler picks the biased coin
    assert kstep_term_prob_min(g, 2) == Fraction(1, 4)
    assert oracle_term_prob(g, 2) == Fraction(1, 4)
    assert kstep_term_prob_min(g, 4) == oracle_term_prob(g, 4) == Fraction(1, 4) + Fraction(3, 4) * Fraction(1, 4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 9), st.sampled_from(["rw1d", "asym23", "geom", "bounded_walk", "kappa_analogue"]))
def test_dp_matches_oracle(k, name):
    g = get_example(name).program
    assert kstep_term_prob_min(g, k) == oracle_term_prob(g, k)


def test_kstep_monotone_in_k():
    g = get_example("asym23").program
    vals = [kstep_term_prob_min(g, k) for k in range(0, 25)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_region_interior_and_frontier():
    g = get_example("rw1d").program
    r = enumerate_region(g, 3)
    assert r.states[0] == g.init_state
    assert not r.closed
    assert all(r.succ[i] is not None for i in r.interior)
    r_closed = enumerate_region(get_example("bounded_walk").program, None)
    assert r_closed.closed and len(r_closed) == 16


def test_region_within_and_restrict():
    g = get_example("rw1d").program
    r = enumerate_region(g, None, within=lambda s: s.vals[0] <= 4)
    assert max(s.vals[0] for s in r.states) == 5
    rr = restrict(r, lambda s: s.loc == "loop")
    assert all(rr.states[i].loc == "loop" for i in rr.interior)


def test_region_budget(monkeypatch):
    monkeypatch.setenv("PCT_STATE_BUDGET", "10")
    with pytest.raises(RegionBudgetExceeded):
        enumerate_region(get_example("rw1d").program, 30)


def test_oracle_budget():
    with pytest.raises(BudgetExceeded):
        oracle_term_prob(get_example("rw1d").program, 30, budget=1000)


def test_ruin_probabilities_fixpoint():
    g = get_example("bounded_walk").program
    r = enumerate_region(g, None)
    top = reach_prob(r, lambda s: s.loc == "zero", "max")
    for x in range(0, 6):
        assert top[State("loop", (x,))] == pytest.approx(x / 5, abs=1e-9)
    term = reach_prob(r, [r.terminal_index], "min")
    assert all(v == pytest.approx(1.0, abs=1e-8) for v in term.values)


def test_reach_prob_horizon_exact():
    g = get_example("geom").program
    r = enumerate_region(g, None)
    v = reach_prob(r, [r.terminal_index], "min", "horizon", k=5)
    assert v.at_init() == Fraction(31, 32)


def test_reach_prob_strict_needs_closed_region():
    r = enumerate_region(get_example("rw1d").program, 5)
    with pytest.raises(NotClosed):
        reach_prob(r, [r.terminal_index], "max", strict=True)


def test_fixpoint_demonic_choice():
    g = parse_program(CHOICE)
    r = enumerate_region(g, None)
    lo = reach_prob(r, [r.terminal_index], "min")
    hi = reach_prob(r, [r.terminal_index], "max")
    assert lo.at_init() == pytest.approx(1.0, abs=1e-8)
    assert hi.at_init() == pytest.approx(1.0, abs=1e-8)
    pol = optimal_policy(r, "min", target=[r.terminal_index])
    assert pol[g.init_state] in (State("fair", (0,)), State("biased", (0,)))


def test_shortest_run_bound():
    g = get_example("bounded_walk").program
    r = enumerate_region(g, None)
    d = shortest_run_bound(r)
    assert d[State("loop", (0,))] == 1
    assert d[State("loop", (5,))] == 2
    assert d[State("loop", (3,))] == 6
    assert d[r.terminal_index] == 0
    open_r = enumerate_region(get_example("rw1d").program, 4)
    assert any(math.isinf(v) for v in shortest_run_bound(open_r).values)


def test_region_csv_header():
    r = enumerate_region(get_example("geom").program, None)
    text = region_csv(r, [Fraction(1, 2), 1])
    assert text.splitlines()[0] == "index,location,x,value"
    assert text.splitlines()[1] == "0,flip,0,1/2"


def test_simulate_deterministic_and_covering():
    g = get_example("geom").program
    a = simulate(g, "first-declared", runs=4000, max_steps=50, seed=7)
    b = simulate(g, "first-declared", runs=4000, max_steps=50, seed=7)
    assert a == b
    assert a.interval[0] <= 1 - 2 ** -50 <= a.interval[1]
    assert a.terminated + a.censored + a.stuck == a.runs


def test_simulate_estimate_matches_kstep():
    # walk-step horizon 10 corresponds to max_steps 21 program steps
    g = get_example("rw1d").program
    exact = float(kstep_term_prob_min(g, 21))
    res = simulate(g, "first-declared", runs=20000, max_steps=21, seed=3)
    assert res.interval[0] <= exact <= res.interval[1]


def test_simulate_policy_table():
    g = parse_program(CHOICE)
    with pytest.raises(PolicyIncomplete):
        simulate(g, {}, runs=10, max_steps=5, seed=0)
    pol = {g.init_state: State("biased", (0,))}
    res = simulate(g, pol, runs=20000, max_steps=2, seed=1)
    assert res.interval[0] <= 0.25 <= res.interval[1]
