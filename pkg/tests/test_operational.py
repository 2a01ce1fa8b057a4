import random

import pytest
from hypothesis import given, strategies as st

from conftest import belief
from pblimp import Q, load_program
from pblimp.belief import Assignment, initial_belief, prob
from pblimp.corpus import Limits, generate_case
from pblimp.errors import DomainError, ParameterError
from pblimp.operational import (
    AltConfiguration,
    Configuration,
    exec_alt,
    exec_from_belief,
    explore,
    simulate,
    simulate_many,
    step,
    step_alt,
)
from pblimp.parser import parse, parse_prop, parse_statement
from pblimp.syntax import TERMINATED, If, Seq, Skip

D = ("d",)


def test_skip_step():
    b = belief(D, ((0,), 1))
    s = Assignment(D, (0,))
    assert step(Configuration(Skip(), b, s)) == [Configuration(TERMINATED, b, s)]
    assert step_alt(AltConfiguration(Skip(), b)) == [AltConfiguration(TERMINATED, b)]


def test_sample_step_branches_on_truth():
    b = belief(D, ((0,), 1))
    stmt = parse_statement("d = sample(0.9|1> + 0.1|0>);")
    succs = step(Configuration(stmt, b, Assignment(D, (0,))))
    post = belief(D, ((1,), "9/10"), ((0,), "1/10"))
    assert [(s.truth.values, s.pathprob) for s in succs] == [((0,), Q(1, 10)), ((1,), Q(9, 10))]
    assert all(s.belief == post for s in succs)


def test_sample_step_alt_is_deterministic():
    b = belief(D, ((0,), 1))
    stmt = parse_statement("d = sample(0.9|1> + 0.1|0>);")
    succs = step_alt(AltConfiguration(stmt, b))
    assert succs == [AltConfiguration(TERMINATED, belief(D, ((1,), "9/10"), ((0,), "1/10")))]


def test_while_unrolls_once():
    stmt = parse_statement("while (o < 2) { o = o + 1; }")
    b = belief(("o",), ((0,), 1))
    s = Assignment(("o",), (0,))
    (succ,) = step(Configuration(stmt, b, s))
    assert succ.continuation == If(stmt.cond, Seq(stmt.body, stmt), Skip())


def test_observe_alt_branches():
    b = belief(("x", "o"), ((0, 0), "1/2"), ((1, 0), "1/2"))
    stmt = parse_statement("o = observe x;")
    succs = step_alt(AltConfiguration(stmt, b))
    assert [(s.belief, s.pathprob) for s in succs] == [
        (belief(("x", "o"), ((0, 0), 1)), Q(1, 2)),
        (belief(("x", "o"), ((1, 1), 1)), Q(1, 2)),
    ]
    td = exec_alt(stmt, b)
    assert sorted(td.entries.values()) == [Q(1, 2), Q(1, 2)]


def test_observe_is_deterministic_given_truth():
    b = belief(("x", "o"), ((0, 0), "1/2"), ((1, 0), "1/2"))
    stmt = parse_statement("o = observe x;")
    (succ,) = step(Configuration(stmt, b, Assignment(("x", "o"), (1, 0))))
    assert succ.belief == belief(("x", "o"), ((1, 1), 1))
    assert succ.truth.values == (1, 1)


def test_explore_skip():
    b = belief(D, ((0,), 1))
    s = Assignment(D, (0,))
    td = explore(Skip(), b, s)
    assert td.entries == {(b, s): 1} and td.residual == 0


FRAGMENT = (
    "uvar d in {0, 1}; uvar t in {0, 1};\n"
    "d = sample(0.9|1> + 0.1|0>);\n"
    "d = sample(0.75|d> + 0.25|0>);\n"
    "t = sample(0.95|d> + 0.05|1-d>);\n"
    "observe t;\n"
)


def test_treatment_fragment_branch_probabilities():
    prog = load_program(FRAGMENT)
    b0 = initial_belief(prog.signature)
    alt = exec_alt(prog.body, b0)
    by_t = {}
    for beta, p in alt.entries.items():
        t = beta.entries[0][0][prog.signature.index["t"]]
        by_t[t] = p
        if t == 1:
            assert prob(beta, parse_prop("d = 1")) == Q(513, 526)
    assert by_t == {1: Q(263, 400), 0: Q(137, 400)}
    assert exec_from_belief(prog.body, b0).marginal() == alt


def test_divergent_loop_leaves_residual():
    prog = parse("ovar o;\nwhile (true) { skip; }")
    b0 = initial_belief(prog.signature)
    for fuel in (0, 1, 5):
        td = exec_from_belief(prog.body, b0, fuel)
        assert td.entries == {} and td.residual == 1


def test_fuel_counts_guard_checks():
    prog = parse("ovar o;\nwhile (o < 3) { o = o + 1; }")
    b0 = initial_belief(prog.signature)
    # three body runs need four guard checks
    assert exec_alt(prog.body, b0, 3).residual == 1
    done = exec_alt(prog.body, b0, 4)
    assert done.residual == 0 and list(done.entries.values()) == [1]


def test_loops_need_fuel():
    prog = parse("ovar o;\nwhile (o < 3) { o = o + 1; }")
    with pytest.raises(ValueError):
        exec_alt(prog.body, initial_belief(prog.signature))


def test_deterministic_program_gives_point_mass():
    prog = parse("ovar o; ovar p;\no = 2; p = o * o;")
    td = exec_from_belief(prog.body, initial_belief(prog.signature)).marginal()
    assert list(td.entries.values()) == [1]


def test_unbound_parameter(treat):
    with pytest.raises(ParameterError):
        exec_alt(treat.body, initial_belief(treat.signature), fuel=3)


def test_sampling_outside_domain_is_an_error():
    prog = parse("uvar d in {0, 1};\nd = sample(1|2>);")
    with pytest.raises(DomainError):
        exec_alt(prog.body, initial_belief(prog.signature), sig=prog.signature)


def test_treatment_fuel_three(treat):
    params = {"q": Q(1, 10)}
    b0 = initial_belief(treat.signature)
    joint = exec_from_belief(treat.body, b0, 3, params, treat.signature)
    alt = exec_alt(treat.body, b0, 3, params, treat.signature)
    assert joint.marginal() == alt
    # only the t = 0 branch of the first round can exit within three checks
    assert alt.residual == Q(263, 400)
    assert alt.terminated_mass() + alt.residual == 1


def test_simulation_is_reproducible(treat):
    b0 = initial_belief(treat.signature)
    params = {"q": Q(1, 10)}
    a = simulate(treat.body, b0, 42, params=params, sig=treat.signature)
    b = simulate(treat.body, b0, 42, params=params, sig=treat.signature)
    assert a == b and a.terminated
    runs = simulate_many(treat.body, b0, 3, 20, params=params, sig=treat.signature)
    assert runs == simulate_many(treat.body, b0, 3, 20, params=params, sig=treat.signature)


def test_simulation_reports_non_termination():
    prog = parse("ovar o;\nwhile (true) { skip; }")
    t = simulate(prog.body, initial_belief(prog.signature), 0, max_steps=50)
    assert not t.terminated and t.steps == 50


# --- properties over generated programs ------------------------------------------

LIMITS = Limits()


def cases():
    return st.integers(0, 10**6).map(lambda s: generate_case(random.Random(s), LIMITS))


@given(cases())
def test_mass_is_conserved(case):
    sig = case.program.signature
    td = exec_alt(case.body, case.beta0, sig=sig)
    assert td.terminated_mass() + td.residual == 1
    joint = exec_from_belief(case.body, case.beta0, sig=sig)
    assert joint.terminated_mass() + joint.residual == 1


@given(cases())
def test_exploration_order_does_not_matter(case):
    sig = case.program.signature
    for sigma, _ in case.beta0.items():
        a = explore(case.body, case.beta0, sigma, sig=sig)
        b = explore(case.body, case.beta0, sigma, sig=sig, reverse=True)
        assert a == b


@given(cases())
def test_belief_accuracy(case):
    from pblimp.corpus import check_belief_accuracy

    assert check_belief_accuracy(case) is None


@given(cases())
def test_semantics_agree(case):
    from pblimp.corpus import check_operational_correctness

    assert check_operational_correctness(case) is None


@given(cases())
def test_final_beliefs_are_consistent(case):
    from pblimp.belief import is_consistent

    sig = case.program.signature
    for beta in exec_alt(case.body, case.beta0, sig=sig).entries:
        assert is_consistent(beta, sig.observables)
