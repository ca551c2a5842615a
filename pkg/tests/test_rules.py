import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pctcheck.certificates import parse_certificate
from pctcheck.cfg import parse_program
from pctcheck.corpus import all_examples, get_example
from pctcheck.rules import (
    REFUTED,
    VERIFIED_COMPLETE,
    VERIFIED_ON_REGION,
    check,
    check_lower_bound_family,
)
from pctcheck.semantics import enumerate_region, reach_prob

GEOM = get_example("geom").program
RW1D = get_example("rw1d").program
ASYM = get_example("asym23").program
BOUNDED = get_example("bounded_walk").program


def conditions(v):
    return {x.condition for x in v.violations}


def test_verdict_json_has_fixed_keys():
    v = check(RW1D, get_example("rw1d").certificate("rw1d.martingale.cert"), depth=25)
    d = json.loads(v.to_json())
    assert list(d) == ["status", "conclusion", "violations", "frontier", "stats"]
    assert v.exit_code == 2


# Rule 1 ----------------------------------------------------------------


def test_variant_bounded_walk_complete():
    v = check(BOUNDED, get_example("bounded_walk").certificate("bounded_walk.variant.cert"))
    assert v.status == VERIFIED_COMPLETE and v.conclusion == "AST" and v.exit_code == 0


def test_variant_rw1d_refuted_at_hi():
    c = get_example("rw1d").certificate("rw1d.variant.cert")
    v = check(RW1D, c, depth=int(c.hi) + 2)
    assert v.status == REFUTED
    first = v.violations[0]
    assert first.condition == "U-upper"
    assert first.values["U"] == c.hi


def test_variant_vacuous_on_terminal_init():
    g = parse_program("vars x; init t (x = 0); terminal t;")
    c = parse_certificate("rule: variant; fn U at *: 0; lo: 0; hi: 1; eps: 1/2;")
    assert check(g, c, depth=3).status == VERIFIED_COMPLETE


def test_variant_eps_is_strict():
    c = parse_certificate("rule: variant; fn U at flip: 1; fn U at lend: 0; lo: 0; hi: 2; eps: 1/2;")
    v = check(GEOM, c, depth=3)
    assert v.status == REFUTED and conditions(v) == {"U-prob-decrease"}


# Rule 2 ----------------------------------------------------------------


def test_martingale_rw1d_on_region():
    v = check(RW1D, get_example("rw1d").certificate("rw1d.martingale.cert"), depth=25)
    assert v.status == VERIFIED_ON_REGION
    assert v.stats["max_V"] <= v.stats["max_witness_r"]
    assert len(v.frontier) >= 1


def test_martingale_sign_violation():
    c = parse_certificate("""rule: martingale;
        fn V at loop: x; fn V at inc: x + 1; fn V at dec: x - 1; fn V at lend: 0;
        fn U at loop: 2 * abs(x) + 1; fn U at inc: 2 * abs(x + 1) + 2; fn U at dec: 2 * abs(x - 1) + 2;
        fn U at lend: 0; witness: 5, 14, 1/4;""")
    v = check(RW1D, c, depth=10)
    assert v.status == REFUTED
    assert "V-positive" in conditions(v)


def test_martingale_tailend():
    v = check(get_example("tailend").program, get_example("tailend").certificate("tailend.martingale.cert"),
              depth=12)
    assert v.status == VERIFIED_ON_REGION


def test_witness_bound_violation():
    c = parse_certificate("""rule: martingale;
        fn V at flip: 1; fn V at lend: 0; fn U at flip: 1; fn U at lend: 0; witness: 1, 0, 1/4;""")
    v = check(GEOM, c, depth=3)
    assert conditions(v) == {"witness-bound[r=1]"}


# Rule 3 ----------------------------------------------------------------


def test_smvariant_negative_d_refuted_on_grid():
    c = parse_certificate("""rule: smvariant; fn V at flip: 1; fn V at lend: 0;
        p_fn: 1/2; d_fn: -1; grid: 1, 2;""")
    v = check(GEOM, c, depth=3)
    assert v.status == REFUTED
    assert "d-positive[grid]" in conditions(v)


def test_smvariant_geom_complete():
    c = parse_certificate("""rule: smvariant; fn V at flip: 1; fn V at lend: 0;
        p_fn: 1/2; d_fn: 1/2; grid: 1, 2;""")
    v = check(GEOM, c, depth=3)
    assert v.status == VERIFIED_COMPLETE


def test_margin_warning_is_not_a_pass():
    c = parse_certificate("""rule: smvariant; fn V at flip: ln(1 + 1/10000000000); fn V at lend: 0;
        p_fn: 1/2; d_fn: v / 2; grid: 1, 2;""")
    v = check(GEOM, c, depth=3)
    assert v.status == REFUTED
    assert [x.kind for x in v.violations if x.condition == "V-positive"] == ["margin-warning"]


# Rule 4 ----------------------------------------------------------------


def test_upper_asym23_exact_martingale():
    v = check(ASYM, get_example("asym23").certificate("asym23.upper.cert"), depth=30)
    assert v.status == VERIFIED_ON_REGION
    assert v.stats["min_margin_by_condition"]["SI-expectation"] == 0


def test_upper_initial_value_violation():
    c = get_example("asym23").certificate("asym23.upper.cert")
    from dataclasses import replace
    v = check(ASYM, replace(c, p=Fraction(1, 4)), depth=10)
    assert v.status == REFUTED and conditions(v) == {"SI-init"}


def test_upper_constant_one_needs_p_at_least_one():
    c = parse_certificate("rule: upper; fn SI at *: 1; p: 999/1000;")
    v = check(GEOM, c, depth=3)
    assert v.status == REFUTED and conditions(v) == {"SI-init"}


# Rule 5 ----------------------------------------------------------------


def test_silower_asym23():
    v = check(ASYM, get_example("asym23").certificate("asym23.silower.cert"), depth=30)
    assert v.status == VERIFIED_ON_REGION
    assert v.stats["bound"] == Fraction(15, 31)


def test_silower_zero_set_violation():
    c = get_example("asym23").certificate("asym23.silower.cert")
    from dataclasses import replace
    from pctcheck.expr import parse_expr
    from pctcheck.certificates import ClosedForm
    U = ClosedForm("U", tuple((l, parse_expr("2 * x + 1") if l == "loop" else e) for l, e in c.U.cases))
    v = check(ASYM, replace(c, U=U), depth=20)
    assert v.status == REFUTED
    assert "U-zero-set" in conditions(v)


def test_silower_bounded_walk_complete():
    v = check(BOUNDED, get_example("bounded_walk").certificate("bounded_walk.silower.cert"))
    assert v.status == VERIFIED_COMPLETE


# Rule 6 ----------------------------------------------------------------


def test_family_asym23():
    v = check(ASYM, get_example("asym23").certificate("asym23.lowerfamily.cert"))
    assert v.status == VERIFIED_ON_REGION
    assert v.stats["best_bound"] == 1 - (Fraction(1, 2) + Fraction(1, 62))
    assert "limit claim" in v.conclusion and "not verified" in v.conclusion


def test_family_aggregation_violation():
    c = parse_certificate("""rule: lowerfamily; p: 1/2;
        entry 4 { invariant: x >= 0;
          fn SI at loop: min(1, (1 - (1/2) ^ x) * 4/3); fn SI at inc: min(1, (1 - (1/2) ^ (x + 1)) * 4/3);
          fn SI at dec: min(1, (1 - (1/2) ^ (x - 1)) * 4/3); fn SI at lend: 0;
          fn U at loop: if x < 2 then 2 * x + 1 else 0; fn U at inc: if x < 1 then 2 * x + 4 else 0;
          fn U at dec: if x <= 2 then 2 * x else 0; fn U at lend: 0;
          p: 4/5; eps: 1/4; H: 4; }""")
    v = check_lower_bound_family(ASYM, c, lambda n: 8)
    assert v.status == REFUTED
    assert conditions(v) == {"n=4:family-bound"}


def test_family_single_entry_vacuous():
    c = parse_certificate("""rule: lowerfamily; p: 0;
        entry 1 { fn SI at *: 0; fn U at flip: 1; fn U at lend: 0; p: 1/2; eps: 1/4; H: 1; }""")
    v = check_lower_bound_family(GEOM, c, lambda n: 2)
    assert v.status == VERIFIED_ON_REGION
    assert v.stats["best_bound"] == 0


# Rule 7 ----------------------------------------------------------------


def test_siast_all_anchors_complete():
    v = check(BOUNDED, get_example("bounded_walk").certificate("bounded_walk.siast.cert"))
    assert v.status == VERIFIED_COMPLETE


def test_siast_init_anchor_only():
    c = get_example("bounded_walk").certificate("bounded_walk.siast.cert")
    from dataclasses import replace
    v = check(BOUNDED, replace(c, anchors=(BOUNDED.init_state,)))
    assert v.status == VERIFIED_ON_REGION
    assert any("anchors incomplete" in x for x in v.stats["caveats"])


def test_siast_anchor_above_p():
    c = parse_certificate(get_example("bounded_walk").files()["bounded_walk.siast.cert"].replace(
        "fn SI at *: 0;", "fn SI at *: if terminal then 0 else 1/2 + 1/100000000;"))
    v = check(BOUNDED, c)
    assert v.status == REFUTED
    assert all(x.condition.startswith("SI-init") for x in v.violations)


# properties --------------------------------------------------------------


def _golden():
    for ex in all_examples():
        for c in ex.certs:
            if c.within is None and c.where is None:
                yield ex.name, c


@pytest.mark.parametrize("name,entry", list(_golden()), ids=[c.filename for _, c in _golden()])
def test_monotone_in_region_size(name, entry):
    ex = get_example(name)
    g = ex.program
    c = ex.certificate(entry.filename)
    if entry.rule == "lowerfamily":
        pytest.skip("family entries carry their own depths")
    seen_refuted = False
    for d in range(2, 14, 2):
        v = check(g, c, depth=d)
        if seen_refuted:
            assert v.status == REFUTED
        seen_refuted = seen_refuted or v.status == REFUTED


def test_determinism():
    c = get_example("rw1d").certificate("rw1d.variant.cert")
    a = check(RW1D, c, depth=14)
    b = check(RW1D, c, depth=14)
    assert a.to_json() == b.to_json() and a.report() == b.report()
    keys = [(x.state_index if x.state_index is not None else -1, x.condition) for x in a.violations]
    assert keys == sorted(keys)


# soundness cross-check on random finite walks

@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(1, 5), st.integers(1, 9))
def test_soundness_cross_check(width, start, num):
    start = min(start, width - 1)
    p = Fraction(num, 10)
    g = parse_program(f"""
        vars x;
        init loop (x = {start});
        terminal fin;
        loc loop : prob {{
          edge -> up   guard: x > 0 && x < {width} prob: {p};
          edge -> down guard: x > 0 && x < {width} prob: {1 - p};
          edge -> fin  guard: x == 0 prob: 1;
          edge -> zero guard: x == {width} prob: 1;
        }}
        loc up : assign {{ edge -> loop set x := x + 1; }}
        loc down : assign {{ edge -> loop set x := x - 1; }}
        loc zero : assign {{ edge -> fin set x := 0; }}
        loc fin : terminal {{ }}
    """)
    from pctcheck.constructions import build_diagonal_v, build_r_matrix, martingale_from_tables
    r = enumerate_region(g, None)
    _, V = build_diagonal_v(build_r_matrix(r), 6)
    c = martingale_from_tables(r, V)
    v = check(g, c, region=r)
    assert v.status == VERIFIED_COMPLETE
    if v.status == VERIFIED_COMPLETE:
        val = reach_prob(r, [r.terminal_index], "min").at_init()
        assert val >= 1 - 1e-8
