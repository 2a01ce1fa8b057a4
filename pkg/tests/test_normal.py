from conftest import belief
from pblimp import Q, parse
from pblimp.normal import NormalForm, layout_for, make_prop_fact, normalize, table_to_expr
from pblimp.parser import parse_expr, parse_prop
from pblimp.predicates import eval_predicate, parse_predicate

SIG = parse("param q; uvar d in {0, 1}; uvar t in {0, 1}; ovar o;\nskip;").signature
LAY = layout_for(SIG)


def nf(text):
    return normalize(parse_predicate(text, SIG), SIG)


def test_layout_rows_cover_unobservable_domains():
    assert len(LAY.rows) == 4
    assert LAY.table(parse_expr("d + t")) == LAY.table(parse_expr("t + d"))


def test_equal_predicates_share_a_normal_form():
    assert nf("Pr(d = 1) + Pr(d = 0)") == nf("1")
    assert nf("2 * Pr(d = 1 && t = 1) + 2 * Pr(d = 1 && t = 0)") == nf("2 * Pr(d = 1)")
    assert nf("Ex(d + t)") == nf("Pr(d = 1) + Pr(t = 1)")


def test_guard_on_a_row_constant_becomes_an_observable_fact():
    # Pr(o = 0) is 0 or 1 on a consistent belief, so the guard is decided by o alone
    f = nf("[Pr(o = 0) = 1] * Pr(d = 1)")
    b1 = belief(SIG.names, ((1, 0, 0), 1))
    b2 = belief(SIG.names, ((1, 0, 2), 1))
    assert f.evaluate(b1) == 1 and f.evaluate(b2) == 0


def test_contradictory_contexts_are_pruned():
    f = nf("Pr(d = 1)")
    yes = f.with_item(make_prop_fact(parse_prop("o = 0"), True))
    both = yes.with_item(make_prop_fact(parse_prop("o = 0"), False))
    assert both.is_zero()


def test_parameters_stay_symbolic():
    f = nf("q * Pr(d = 1) + Pr(t = 0)")
    assert f.params() == {"q"}
    b = belief(SIG.names, ((1, 0, 0), "1/2"), ((0, 1, 0), "1/2"))
    assert f.evaluate(b, {"q": Q(1, 3)}) == Q(1, 6) + Q(1, 2)


def test_arithmetic():
    f, g = nf("Pr(d = 1)"), nf("Pr(t = 1)")
    assert (f + g) - g == f
    assert f.scale(Q(0)).is_zero()
    assert NormalForm.zero(LAY).is_zero()


def test_table_to_expr_round_trip():
    t = LAY.table(parse_expr("d * 2 + [t = 1]"))
    assert LAY.table(table_to_expr(LAY, t)) == t


def test_rendering_is_a_grammar_predicate():
    f = nf("[Pr(d = 1) > q] * Ex(d + t) + 1/2")
    g = parse_predicate(str(f), SIG)
    b = belief(SIG.names, ((1, 1, 0), "3/4"), ((0, 0, 0), "1/4"))
    assert eval_predicate(g, b, {"q": Q(1, 2)}) == f.evaluate(b, {"q": Q(1, 2)})
