import random

import pytest
from hypothesis import given, strategies as st

from conftest import belief
from pblimp import Q
from pblimp.belief import assign_update, condition, expect, prob, random_belief, sample_update
from pblimp.errors import NotExpressible, ParseError
from pblimp.normal import normalize
from pblimp.parser import parse, parse_expr, parse_prop, parse_statement
from pblimp.poly import Poly
from pblimp.predicates import (
    GPredicate,
    Guard,
    Term,
    eval_ex,
    eval_guard,
    eval_predicate,
    format_predicate,
    mask,
    parse_predicate,
    rewrite_assign,
    rewrite_observe,
    rewrite_sample,
)
from pblimp.syntax import BinOp, Compare, Const, Iverson, Var, simplify

D = ("d",)
PRIOR = belief(D, ((1,), "9/10"), ((0,), "1/10"))


def ex(text):
    return GPredicate.ex(parse_expr(text))


def test_eval_ex_examples():
    assert eval_ex(parse_expr("[d = 1]"), PRIOR) == Q(9, 10)
    assert eval_ex(Const(1), PRIOR) == 1
    assert eval_ex(parse_expr("d * 2"), belief(D, ((0,), "1/2"), ((2,), "1/2"))) == 2


def test_invariant_selects_parameter_summand(treat_sig):
    inv = parse_predicate("(1 - Pr(inCare)) * Pr(d = 1) + Pr(inCare) * q", treat_sig)
    names = treat_sig.names
    b = belief(names, ((1, 0, 1, 0), "1/2"), ((0, 1, 1, 0), "1/2"))
    assert eval_predicate(inv, b, {"q": Q(1, 10)}) == Q(1, 10)
    b = belief(names, ((1, 0, 0, 0), "1/3"), ((0, 1, 0, 0), "2/3"))
    assert eval_predicate(inv, b, {"q": Q(1, 10)}) == Q(1, 3)


def test_zero_predicate():
    z = GPredicate(())
    assert eval_predicate(z, PRIOR) == 0
    assert format_predicate(z) == "0"


def test_guarded_term():
    g = Guard(parse_expr("[d = 1]"), ">", Q(1, 10), Const(1))
    f = GPredicate((Term(Poly.const(1), (g,), parse_expr("[d = 1]")),))
    assert eval_guard(g, PRIOR) == 1
    assert eval_predicate(f, PRIOR) == Q(9, 10)
    low = belief(D, ((1,), "1/20"), ((0,), "19/20"))
    assert eval_predicate(f, low) == 0


def test_rewrite_assign_examples():
    f = rewrite_assign(ex("[inCare = 1]"), "inCare", Const(0))
    assert eval_predicate(f, belief(("inCare",), ((1,), 1))) == 0
    assert rewrite_assign(ex("x"), "x", Var("x")) == ex("x")
    f = rewrite_assign(ex("[d = 1]"), "d", Const(1))
    assert eval_predicate(f, PRIOR) == 1


def test_rewrite_sample_examples():
    f = rewrite_sample(ex("[d = 1]"), "d", parse_statement("d = sample(0.75|d> + 0.25|0>);").spec)
    assert normalize(f, parse("uvar d in {0, 1};\nskip;").signature) == normalize(
        parse_predicate("3/4 * Pr(d = 1)"), parse("uvar d in {0, 1};\nskip;").signature
    )
    same = rewrite_sample(ex("d + 1"), "d", parse_statement("d = sample(1|d>);").spec)
    assert eval_predicate(same, PRIOR) == eval_predicate(ex("d + 1"), PRIOR)


def test_rewrite_sample_test_model():
    spec = parse_statement("t = sample(0.95|d> + 0.05|1-d>);").spec
    f = rewrite_sample(ex("[t = 1]"), "t", spec)
    names = ("d", "t")
    b = belief(names, ((1, 0), "27/40"), ((0, 0), "13/40"))
    assert eval_predicate(f, b) == prob(sample_update(b, "t", spec), parse_prop("t = 1"))
    assert eval_predicate(f, b) == Q(27, 40) * Q(19, 20) + Q(13, 40) * Q(1, 20)


def test_rewrite_observe_examples():
    names = ("d", "t")
    b = belief(names, ((1, 1), "513/800"), ((1, 0), "27/800"), ((0, 1), "13/800"), ((0, 0), "247/800"))
    f = rewrite_observe(ex("[d = 1]"), "t", 1)
    assert eval_predicate(f, b) == Q(513, 526)
    self_obs = rewrite_observe(ex("[t = 1]"), "t", 1)
    assert eval_predicate(self_obs, b) == 1


def test_rewrite_observe_clears_guard_denominators():
    g = Guard(parse_expr("[d = 1]"), ">", "q", Const(1))
    f = GPredicate((Term(Poly.const(1), (g,), Const(1)),))
    (term,) = rewrite_observe(f, "t", 1).terms
    (g2,) = term.guards
    assert g2.op == ">" and g2.coeff == "q"
    assert simplify(g2.lhs) == simplify(mask(parse_expr("[d = 1]"), "t", 1))
    assert simplify(g2.rhs) == simplify(mask(Const(1), "t", 1))


# --- surface syntax -------------------------------------------------------------


@pytest.mark.parametrize(
    "text",
    [
        "Pr(d = 1)",
        "3/4 * Pr(d = 1) + 1/4",
        "q * Pr(inCare != 0) + [Pr(inCare = 0) = 1] * Pr(d = 1)",
        "[Pr(d = 1) > q] * Ex(d + t)",
        "[Ex([d = 1]) <= 1/2 * Ex(t)] * 2 * q * Pr(t = 0)",
        "Ex([d = 1] * [t = 1]) / Pr(t = 1)",
    ],
)
def test_format_parse_round_trip(text, treat_sig):
    f = parse_predicate(text, treat_sig)
    assert parse_predicate(format_predicate(f), treat_sig) == f


def test_distribution_over_sums(treat_sig):
    f = parse_predicate("[Pr(d = 1) > q] * (Pr(d = 1) + 2 * Pr(t = 1))", treat_sig)
    assert len(f.terms) == 2
    assert all(len(t.guards) == 1 for t in f.terms)
    g = parse_predicate("2 * (3 * Pr(d = 1))", treat_sig)
    assert g.terms[0].scalar == Poly.const(6)


def test_two_unobservable_expectations_cannot_multiply(treat_sig):
    with pytest.raises(NotExpressible):
        parse_predicate("Pr(d = 1) * Pr(t = 1)", treat_sig)


def test_unknown_parameter_rejected(treat_sig):
    with pytest.raises(ParseError):
        parse_predicate("r * Pr(d = 1)", treat_sig)


def test_one_minus_needs_observable(treat_sig):
    with pytest.raises(ParseError):
        parse_predicate("(1 - Pr(d = 1)) * Pr(t = 1)", treat_sig)


# --- rewrite identities --------------------------------------------------------

SIG = parse("uvar a in {0, 1, 2}; uvar b in {0, 1}; ovar o;\nskip;").signature
NAMES = ["a", "b", "o"]


def _expr(rng, depth=2):
    r = rng.random()
    if depth == 0 or r < 0.3:
        return Var(rng.choice(NAMES)) if rng.random() < 0.7 else Const(rng.randint(0, 3))
    if r < 0.45:
        return Iverson(Compare(rng.choice(["=", "<", ">="]), _expr(rng, 0), _expr(rng, 0)))
    return BinOp(rng.choice("+-*/"), _expr(rng, depth - 1), _expr(rng, depth - 1))


def instances():
    def build(seed):
        rng = random.Random(seed)
        beta = random_belief(SIG, rng, max_support=6)
        e = _expr(rng)
        x = rng.choice(["a", "b"])
        top = SIG.domains[x][-1]
        branches = []
        rest = Q(1)
        for _ in range(rng.randint(0, 2)):
            w = rest * Q(rng.randint(1, 3), 4)
            branches.append((w, rng.choice([Const(rng.randint(0, top)), BinOp("-", Const(top), Var("b")), Var("b")])))
            rest -= w
        branches.append((rest, Const(rng.randint(0, top))))
        from pblimp.syntax import SampleSpec

        return beta, e, x, rng.randint(0, top), SampleSpec(tuple(branches)), _expr(rng, 1)

    return st.integers(0, 10**7).map(build)


@given(instances())
def test_assign_identity(inst):
    beta, e, _, _, _, rhs = inst
    rhs = simplify(BinOp("+", Var("o"), Const(1))) if rhs is None else rhs
    obs_rhs = BinOp("+", Var("o"), Const(1))
    f = rewrite_assign(GPredicate.ex(e), "o", obs_rhs)
    assert eval_predicate(f, beta) == expect(assign_update(beta, "o", obs_rhs), e)


@given(instances())
def test_observe_identity_cleared(inst):
    beta, e, x, c, _, _ = inst
    px = prob(beta, Compare("=", Var(x), Const(c)))
    lhs = expect(condition(beta, x, c), e) * px if px > 0 else Q(0)
    assert lhs == eval_ex(mask(e, x, c), beta)
    if px > 0:
        assert eval_predicate(rewrite_observe(GPredicate.ex(e), x, c), beta) == expect(condition(beta, x, c), e)


@given(instances())
def test_sample_identity(inst):
    beta, e, x, _, spec, _ = inst
    f = rewrite_sample(GPredicate.ex(e), x, spec)
    assert eval_predicate(f, beta) == expect(sample_update(beta, x, spec), e)


@given(instances())
def test_normalization_preserves_value(inst):
    beta, e, x, c, spec, other = inst
    g = Guard(e, ">=", Q(1, 2), other)
    f = GPredicate((Term(Poly.const(Q(2, 3)), (g,), other), Term(Poly.const(1), (), e)))
    nf = normalize(f, SIG)
    assert nf.evaluate(beta) == eval_predicate(f, beta)
    assert normalize(nf, SIG) is nf
    assert normalize(nf.to_gpredicate(), SIG) == nf
    assert nf.to_gpredicate() == parse_predicate(str(nf), SIG)


@given(instances())
def test_guards_are_zero_one(inst):
    beta, e, _, _, _, other = inst
    for op in ("<", "<=", "=", "!=", ">=", ">"):
        assert eval_guard(Guard(e, op, Q(1, 3), other), beta) in (0, 1)
