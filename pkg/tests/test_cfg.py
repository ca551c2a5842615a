from fractions import Fraction

import pytest

from pctcheck.cfg import Kind, State, format_program, parse_program, successors, validate_program
from pctcheck.corpus import NAMES, get_example
from pctcheck.errors import (
    AssignmentFanout,
    DuplicateLocation,
    DuplicateTerminal,
    PctSyntaxError,
    UnknownTargetLocation,
)
from pctcheck.semantics import enumerate_region

COIN = """
vars x;
init a (x = 0);
terminal t;
loc a : prob { edge -> t prob: 1/3; edge -> b prob: 2/3; }
loc b : assign { edge -> a set x := x + 1; }
"""


def test_parse_basic():
    g = parse_program(COIN)
    assert g.variables == ("x",)
    assert g.init_state == State("a", (0,))
    assert g.terminal_state == State("t", (0,))
    assert g.kind("a") == Kind.PROB
    assert g.kind("t") == Kind.TERMINAL
    assert g.describe(State("b", (3,))) == "(b, x=3)"


def test_successors_in_declaration_order():
    g = parse_program(COIN)
    out = successors(g, g.init_state)
    assert [(s.state, s.prob) for s in out] == [(State("t", (0,)), Fraction(1, 3)),
                                                (State("b", (0,)), Fraction(2, 3))]
    assert successors(g, State("b", (0,)))[0].state == State("a", (1,))
    assert successors(g, g.terminal_state) == []


def test_terminal_needs_zero_valuation():
    g = parse_program(COIN)
    assert g.is_terminal(State("t", (0,)))
    assert not g.is_terminal(State("t", (1,)))


def test_long_tail_phase_two_step():
    g = get_example("tailend").program
    out = successors(g, State("tail", (2, 0)))
    assert len(out) == 1 and out[0].state == State("head", (1, 0))


@pytest.mark.parametrize("name", NAMES)
def test_format_round_trip(name):
    g = get_example(name).program
    assert parse_program(format_program(g)) == g


@pytest.mark.parametrize("name", NAMES)
def test_corpus_programs_validate(name):
    g = get_example(name).program
    region = enumerate_region(g, 8)
    assert [d for d in validate_program(g, region.states) if d.severity == "error"] == []


def test_duplicate_location():
    with pytest.raises(DuplicateLocation):
        parse_program(COIN + "loc a : assign { edge -> t; }")


def test_duplicate_terminal():
    with pytest.raises(DuplicateTerminal):
        parse_program(COIN + "loc u : terminal { }")


def test_unknown_target():
    with pytest.raises(UnknownTargetLocation):
        parse_program(COIN.replace("edge -> a set", "edge -> nowhere set"))


def test_static_fanout_rejected():
    text = COIN.replace("loc b : assign { edge -> a set x := x + 1; }",
                        "loc b : assign { edge -> a set x := x + 1; edge -> t; }")
    with pytest.raises(AssignmentFanout):
        parse_program(text)


def test_syntax_error_reports_line():
    with pytest.raises(PctSyntaxError) as exc:
        parse_program("vars x;\ninit a (x = 0)\nterminal t;")
    assert exc.value.line == 3


def test_probability_mass_diagnostic():
    g = parse_program(COIN.replace("prob: 2/3", "prob: 1/2"))
    diags = validate_program(g, [g.init_state])
    assert [d.kind for d in diags] == ["ProbabilityMassNotOne"]
    assert diags[0].value == Fraction(5, 6)


def test_no_successor_diagnostic():
    g = parse_program(COIN.replace("edge -> t prob: 1/3; edge -> b prob: 2/3;",
                                   "edge -> t guard: x > 0 prob: 1;"))
    assert [d.kind for d in validate_program(g, [g.init_state])] == ["NoSuccessor"]


def test_exponent_note_only_on_request():
    g = get_example("tailend").program
    assert validate_program(g, [g.init_state]) == []
    notes = validate_program(g, [g.init_state], include_notes=True)
    assert [d.kind for d in notes] == ["NonCoreExponentiation"]


def test_dynamic_fanout_pragma():
    text = """
    pragma dynamic_fanout;
    vars x;
    init a (x = 0);
    terminal t;
    loc a : assign { edge -> t guard: x == 0; edge -> t guard: x >= 0; }
    """
    g = parse_program(text)
    with pytest.raises(AssignmentFanout):
        successors(g, g.init_state)
