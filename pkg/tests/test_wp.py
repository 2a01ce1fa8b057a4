import random

import pytest
from hypothesis import given, strategies as st

from conftest import PROGRAMS, belief
from pblimp import Q, load_program, parse
from pblimp.belief import initial_belief, random_belief
from pblimp.corpus import Limits, check_wp_soundness, generate_case
from pblimp.errors import DomainRequired, MixedStrategies, StrategyMissing, UnprovedInvariant
from pblimp.normal import normalize
from pblimp.operational import exec_alt
from pblimp.parser import parse_statement
from pblimp.predicates import eval_predicate, parse_predicate
from pblimp.syntax import Observe, bounded_while, loops_of
from pblimp.wp import (
    ALL_UNOBSERVABLE,
    EXACT,
    LOWER,
    UPPER,
    CharacteristicFunction,
    Falsified,
    Invariant,
    NoChange,
    Proved,
    Unroll,
    apply_characteristic,
    bound_program,
    check_invariant,
    mod_set,
    simplify_independent,
    wp,
    wp_eval,
    wp_loopfree,
    wp_unroll,
)

DT = "uvar d in {0, 1}; uvar t in {0, 1}; ovar inCare; ovar o;\nskip;"
SIG = parse(DT).signature


def pred(text, sig=SIG):
    return parse_predicate(text, sig)


def same(a, b, sig=SIG):
    return normalize(a, sig) == normalize(b, sig)


# --- loop-free rules ------------------------------------------------------------


def test_skip_is_identity():
    f = pred("Pr(d = 1) + 2 * Ex(o)")
    assert wp_loopfree(parse_statement("skip;"), f, SIG) == normalize(f, SIG)


def test_assignment_examples():
    out = wp_loopfree(parse_statement("inCare = 0;"), pred("Pr(inCare = 1)"), SIG)
    assert out.is_zero()
    out = wp_loopfree(parse_statement("o = o + 1;"), pred("Ex(o)"), SIG)
    assert same(out, pred("Ex(o + 1)"))


def test_sample_example():
    out = wp_loopfree(parse_statement("d = sample(0.75|d> + 0.25|0>);"), pred("Pr(d = 1)"), SIG)
    assert same(out, pred("3/4 * Pr(d = 1)"))


def test_observe_example():
    stmt = parse_statement("o = observe t;")
    out = wp_loopfree(stmt, pred("Pr(d = 1)"), SIG)
    b = belief(SIG.names, ((1, 1, 0, 0), "513/800"), ((1, 0, 0, 0), "27/800"),
               ((0, 1, 0, 0), "13/800"), ((0, 0, 0, 0), "247/800"))
    # P(t=1) * 513/526 + P(t=0) * 27/274
    assert out.evaluate(b) == Q(263, 400) * Q(513, 526) + Q(137, 400) * Q(27, 274)


def test_observe_needs_domain():
    with pytest.raises(DomainRequired):
        wp_loopfree(Observe("inCare", "o"), pred("Pr(d = 1)"), SIG)


def test_infer_introduces_guard():
    stmt = parse_statement("infer (p(d = 1) > 1/2) { o = 1; } else { o = 0; }")
    out = wp_loopfree(stmt, pred("Ex(o)"), SIG)
    hi = belief(SIG.names, ((1, 0, 0, 0), 1))
    lo = belief(SIG.names, ((0, 0, 0, 0), 1))
    assert out.evaluate(hi) == 1 and out.evaluate(lo) == 0


def test_if_on_observable():
    stmt = parse_statement("if (o = 0) { d = 0; } else { skip; }")
    out = wp_loopfree(stmt, pred("Pr(d = 1)"), SIG)
    assert out.evaluate(belief(SIG.names, ((1, 0, 0, 0), 1))) == 0
    assert out.evaluate(belief(SIG.names, ((1, 0, 0, 1), 1))) == 1


def test_wp_loopfree_rejects_loops():
    with pytest.raises(StrategyMissing):
        wp_loopfree(parse_statement("while (o < 1) { o = 1; }"), pred("Ex(o)"), SIG)


# --- mod-set and independence ---------------------------------------------------


def test_mod_set():
    assert mod_set(parse_statement("o = 1; d = sample(1|0>);")) == {"o", "d"}
    assert ALL_UNOBSERVABLE in mod_set(parse_statement("o = observe t;"))
    assert mod_set(parse_statement("o = observe t;"), SIG) == {"o", "t", "d"}
    assert mod_set(parse_statement("while (o < 2) { o = o + 1; }")) == {"o"}


def test_simplify_independent():
    f = pred("Pr(d = 1)")
    assert simplify_independent(parse_statement("o = o + 1;"), f, SIG) == normalize(f, SIG)
    assert simplify_independent(parse_statement("d = sample(1|0>);"), f, SIG) is NoChange
    assert simplify_independent(parse_statement("o = observe t;"), f, SIG) is NoChange
    assert simplify_independent(parse_statement("while (o < 2) { o = o + 1; }"), f, SIG) is NoChange


LIMITS = Limits()


def cases():
    return st.integers(0, 10**6).map(lambda s: generate_case(random.Random(s), LIMITS))


@given(cases())
def test_wp_is_sound_against_operational(case):
    assert check_wp_soundness(case) is None


@given(cases(), st.integers(0, 10**6))
def test_independence_shortcut_changes_nothing(case, seed):
    sig = case.program.signature
    fast = wp_loopfree(case.body, case.post, sig)
    slow = wp_loopfree(case.body, case.post, sig, use_independence=False)
    rng = random.Random(seed)
    for beta in [case.beta0] + [random_belief(sig, rng) for _ in range(5)]:
        assert fast.evaluate(beta) == slow.evaluate(beta)


@given(cases(), st.integers(0, 10**6))
def test_wp_is_linear(case, seed):
    sig = case.program.signature
    other = generate_case(random.Random(seed), LIMITS)
    if other.program.signature != sig:
        other = case
    a, b = Q(2, 3), Q(5, 4)
    f = normalize(case.post, sig)
    g = normalize(other.post, sig)
    lhs = wp_loopfree(case.body, f.scale(a) + g.scale(b), sig)
    rhs = wp_loopfree(case.body, f, sig).scale(a) + wp_loopfree(case.body, g, sig).scale(b)
    assert lhs.evaluate(case.beta0) == rhs.evaluate(case.beta0)


@given(cases())
def test_pointwise_evaluation_matches_symbolic(case):
    sig = case.program.signature
    assert wp_eval(case.body, case.post, case.beta0, sig) == wp_loopfree(case.body, case.post, sig).evaluate(case.beta0)


@given(cases())
def test_wp_result_renders_in_the_grammar(case):
    sig = case.program.signature
    out = wp_loopfree(case.body, case.post, sig)
    g = out.to_gpredicate()
    assert normalize(g, sig) == out
    assert eval_predicate(g, case.beta0) == out.evaluate(case.beta0)


# --- loops ----------------------------------------------------------------------

PARAMS = {"q": Q(1, 10)}


@pytest.fixture(scope="module")
def treat_parts():
    prog = load_program((PROGRAMS / "treat.pbl").read_text())
    (loop,) = loops_of(prog.body)
    post = parse_predicate("Pr(d = 1)", prog.signature)
    inv = parse_predicate((PROGRAMS / "treat_inv.pred").read_text(), prog.signature)
    return prog, loop, post, inv


def test_characteristic_function_first_step(treat_parts):
    prog, loop, post, _ = treat_parts
    sig = prog.signature
    phi = CharacteristicFunction.of(loop, post)
    assert phi.loop == loop
    one = apply_characteristic(phi, normalize(parse_predicate("0", sig), sig), sig)
    assert one == wp_unroll(loop, post, 1, sig)


def test_unrolling_matches_bounded_loop(treat_parts):
    prog, loop, post, _ = treat_parts
    sig = prog.signature
    rng = random.Random(7)
    beliefs = [random_belief(sig, rng) for _ in range(15)]
    for n in range(0, 6):
        sym = wp_unroll(loop, post, n, sig)
        bounded = bounded_while(loop, n)
        for beta in beliefs:
            op = exec_alt(bounded, beta, params=PARAMS, sig=sig).expectation(
                lambda b: eval_predicate(post, b))
            assert sym.evaluate(beta, PARAMS) == op == wp_eval(loop, post, beta, sig, PARAMS, unroll=n)


def test_unrolling_is_monotone(treat_parts):
    prog, loop, post, _ = treat_parts
    sig = prog.signature
    rng = random.Random(3)
    beliefs = [random_belief(sig, rng) for _ in range(10)]
    for beta in beliefs:
        values = [wp_eval(loop, post, beta, sig, PARAMS, unroll=n) for n in range(10)]
        assert values == sorted(values)


def test_treatment_invariant_is_proved(treat_parts):
    prog, loop, post, inv = treat_parts
    assert isinstance(check_invariant(loop, post, inv, prog.signature), Proved)


def test_zero_invariant_is_falsified(treat_parts):
    prog, loop, post, _ = treat_parts
    sig = prog.signature
    res = check_invariant(loop, post, parse_predicate("0", sig), sig)
    assert isinstance(res, Falsified)
    assert res.lhs > res.rhs
    lhs = apply_characteristic(CharacteristicFunction.of(loop, post), parse_predicate("0", sig), sig)
    assert lhs.evaluate(res.witness, res.params) == res.lhs


def test_proved_invariant_bounds_every_unrolling(treat_parts):
    prog, loop, post, inv = treat_parts
    sig = prog.signature
    rng = random.Random(11)
    for _ in range(10):
        beta = random_belief(sig, rng)
        for qv in (Q(0), Q(1, 10), Q(1, 2), Q(9, 10)):
            params = {"q": qv}
            bound = eval_predicate(inv, beta, params)
            assert wp_eval(loop, post, beta, sig, params, unroll=8) <= bound


def test_wp_with_unroll_strategy(treat_parts):
    prog, loop, post, _ = treat_parts
    sig = prog.signature
    out = wp(loop, post, sig, Unroll(3))
    assert out == wp_unroll(loop, post, 3, sig)
    with pytest.raises(StrategyMissing):
        wp(loop, post, sig)


# --- whole-program bounds -------------------------------------------------------


def test_bound_program_with_invariant(treat_parts):
    prog, _, post, inv = treat_parts
    b = bound_program(prog, post, Invariant(inv))
    assert b.tag == UPPER
    assert b.evaluate(initial_belief(prog.signature), PARAMS) == Q(1, 10)


def test_bound_program_with_unrolling(treat_parts):
    prog, _, post, _ = treat_parts
    b = bound_program(prog, post, {0: Unroll(3)})
    assert b.tag == LOWER
    assert b.evaluate(initial_belief(prog.signature), PARAMS) == Q(27, 800)


def test_bound_program_loop_free_is_exact():
    prog = parse("uvar d in {0, 1};\nd = sample(1/4|1> + 3/4|0>);")
    b = bound_program(prog, parse_predicate("Pr(d = 1)", prog.signature))
    assert b.tag == EXACT and b.evaluate(initial_belief(prog.signature)) == Q(1, 4)


def test_bound_program_errors(treat_parts):
    prog, _, post, _ = treat_parts
    with pytest.raises(StrategyMissing):
        bound_program(prog, post)
    with pytest.raises(StrategyMissing):
        bound_program(prog, post, {3: Unroll(1)})
    with pytest.raises(UnprovedInvariant):
        bound_program(prog, post, Invariant(parse_predicate("0", prog.signature)))


def test_mixed_strategies_rejected():
    prog = parse("ovar o; ovar p;\nwhile (o < 2) { o = o + 1; }\nwhile (p < 2) { p = p + 1; }")
    f = parse_predicate("Ex(o + p)", prog.signature)
    with pytest.raises(MixedStrategies):
        bound_program(prog, f, {0: Unroll(2), 1: Invariant(parse_predicate("4", prog.signature))})
    assert bound_program(prog, f, Unroll(3)).evaluate(initial_belief(prog.signature)) == 4
