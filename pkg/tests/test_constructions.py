import math
from fractions import Fraction

import numpy as np
import pytest

from pctcheck.cfg import parse_program
from pctcheck.constructions import (
    build_diagonal_v,
    build_r_matrix,
    guard_strengthen,
    log_gap_transform,
    martingale_from_tables,
    martingale_to_si,
    perturb_to_injective,
    variant_to_martingale,
)
from pctcheck.corpus import get_example
from pctcheck.errors import (
    EscapeBoundViolated,
    NegativeInput,
    NoStrictState,
    NotClosed,
    PhiFailsAtInit,
)
from pctcheck.expr import parse_expr
from pctcheck.rules import VERIFIED_COMPLETE, check
from pctcheck.semantics import ValueMap, enumerate_region, kstep_term_prob_min

BOUNDED = get_example("bounded_walk").program
GEOM = get_example("geom").program


@pytest.fixture(scope="module")
def walk_region():
    return enumerate_region(BOUNDED, None)


@pytest.fixture(scope="module")
def walk_r(walk_region):
    return build_r_matrix(walk_region)


def test_r_matrix_shape_and_edges(walk_region, walk_r):
    vals = walk_r.values
    assert vals.shape == (len(walk_region), len(walk_region) + 1)
    term = walk_region.terminal_index
    for i in range(len(walk_region)):
        assert vals[i, 0] == (0.0 if i == term else 1.0)
    assert np.all(vals[:, -1] == 0)
    assert np.all(vals[term] == 0)


def test_r_matrix_rows_monotone(walk_r):
    assert np.all(np.diff(walk_r.values, axis=1) <= 1e-12)


def test_r_matrix_needs_closed_region():
    r = enumerate_region(get_example("rw1d").program, 5)
    with pytest.raises(NotClosed):
        build_r_matrix(r)


def test_diagonal_sequence_bound(walk_r):
    seq, v = build_diagonal_v(walk_r, 6)
    assert list(seq.indices) == sorted(seq.indices)
    for j, n in enumerate(seq.indices):
        top = min(j, walk_r.values.shape[0] - 1)
        assert np.all(walk_r.values[: top + 1, n] <= 2.0 ** -j + 1e-12)
    assert seq.tail_bound == 2.0 ** -6
    assert v.values[walk_r.region.terminal_index] == 0


def test_diagonal_j_zero_is_one_column(walk_r):
    seq, v = build_diagonal_v(walk_r, 0)
    assert seq.indices == (0,)
    assert v.values == [float(a) for a in walk_r.values[:, 0]]


def test_diagonal_saturates_on_closed_region():
    # the last column is zero, so deep indices settle there instead of running out
    g = parse_program("""vars x; init a (x = 0); terminal t;
        loc a : prob { edge -> a prob: 1/2; edge -> t prob: 1/2; }
        loc t : terminal { }""")
    r = build_r_matrix(enumerate_region(g, None))
    seq, v = build_diagonal_v(r, 30)
    assert np.all(r.values[:, seq.indices[-1]] == 0)
    assert v.values[r.region.init_index] == 1.0


def test_diagonal_pipeline_verifies(walk_region, walk_r):
    _, v = build_diagonal_v(walk_r, 8)
    assert check(BOUNDED, martingale_from_tables(walk_region, v), region=walk_region).status == VERIFIED_COMPLETE


def test_log_gap_values(walk_region):
    vals = [math.e - 1] * len(walk_region)
    vals[walk_region.terminal_index] = 0.0
    out = log_gap_transform(ValueMap(walk_region, vals))
    assert out.values[0] == pytest.approx(1.0, abs=1e-15)
    assert out.values[walk_region.terminal_index] == 0.0


def test_log_gap_rejects_negative(walk_region):
    with pytest.raises(NegativeInput):
        log_gap_transform(ValueMap(walk_region, [-1.0] * len(walk_region)))


def _chain():
    g = parse_program("""vars x; init a (x = 0); terminal t;
        loc a : assign { edge -> b set x := 0; }
        loc b : assign { edge -> t set x := 0; }
        loc t : terminal { }""")
    return g, enumerate_region(g, None)


def test_perturb_keeps_injective_input():
    g, r = _chain()
    vals = [0.0] * len(r)
    for i, s in enumerate(r.states):
        vals[i] = {"a": 2.0, "b": 1.0, "t": 0.0}[g.locations[s.loc].name if isinstance(s.loc, int) else s.loc]
    out = perturb_to_injective(r, ValueMap(r, vals))
    assert out.values == vals
    assert out.meta["perturbation_rounds"] == 0


def test_perturb_breaks_ties(walk_region, walk_r):
    _, v = build_diagonal_v(walk_r, 8)
    v = log_gap_transform(v)
    out = perturb_to_injective(walk_region, v)
    positive = [a for a in out.values if a > 0]
    assert len(set(positive)) == len(positive)
    assert out.meta["perturbation_rounds"] > 0
    c = martingale_from_tables(walk_region, out)
    assert check(BOUNDED, c, region=walk_region).status == VERIFIED_COMPLETE


def test_perturb_no_strict_state():
    g = parse_program("""vars x; init a (x = 0); terminal t;
        loc a : assign { edge -> b set x := 0; }
        loc b : assign { edge -> a set x := 0; }
        loc t : terminal { }""")
    r = enumerate_region(g, None)
    with pytest.raises(NoStrictState):
        perturb_to_injective(r, ValueMap(r, [1.0] * len(r)))


def test_variant_to_martingale_preserves_eps():
    ex = get_example("bounded_walk")
    c = ex.certificate("bounded_walk.variant.cert")
    m = variant_to_martingale(c)
    assert m.witnesses[0].eps == c.eps
    assert check(BOUNDED, m).status == VERIFIED_COMPLETE
    g = get_example("geom")
    m2 = variant_to_martingale(g.certificate("geom.variant.cert"))
    assert check(GEOM, m2, depth=5).status == VERIFIED_COMPLETE


def test_martingale_to_si_geom_single_anchor():
    r = enumerate_region(GEOM, None)
    m = variant_to_martingale(get_example("geom").certificate("geom.variant.cert"))
    si = martingale_to_si(GEOM, r, m, Fraction(1, 2), 1.0, anchors=[GEOM.init_state])
    v = check(GEOM, si, region=r)
    assert v.status != "Refuted"
    assert any("anchors incomplete" in c for c in v.stats["caveats"])


def test_martingale_to_si_all_anchors(walk_region):
    m = variant_to_martingale(get_example("bounded_walk").certificate("bounded_walk.variant.cert"))
    si = martingale_to_si(BOUNDED, walk_region, m, Fraction(1, 2), 1.0)
    assert check(BOUNDED, si, region=walk_region).status == VERIFIED_COMPLETE


def test_martingale_to_si_escape_bound():
    r = enumerate_region(GEOM, None)
    m = variant_to_martingale(get_example("geom").certificate("geom.variant.cert"))
    with pytest.raises(EscapeBoundViolated):
        martingale_to_si(GEOM, r, m, Fraction(1, 2), 0.0)


@pytest.mark.parametrize("name", ["geom", "rw1d", "bounded_walk"])
def test_guard_strengthen_true_is_identity(name):
    g = get_example(name).program
    h = guard_strengthen(g, parse_expr("true"))
    for k in range(0, 12, 3):
        assert kstep_term_prob_min(h, k) == kstep_term_prob_min(g, k)


def test_guard_strengthen_false_at_init():
    with pytest.raises(PhiFailsAtInit):
        guard_strengthen(GEOM, parse_expr("false"))


def test_guard_strengthen_never_increases():
    g = get_example("rw1d").program
    h = guard_strengthen(g, parse_expr("x < 3"))
    for k in (5, 11, 20):
        assert kstep_term_prob_min(h, k) <= kstep_term_prob_min(g, k)
    assert kstep_term_prob_min(h, 20) < kstep_term_prob_min(g, 20)
