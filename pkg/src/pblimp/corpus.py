"""Random well-typed programs and the differential checks run over them.

Generated programs are always syntactically expressible: unobservable
variables have small finite domains, sampled values stay inside the target's
domain, guards of ``if``/``while`` read observables only, and loops are run
as ``while^n`` bounded unrollings.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from ._rational import Q, q_str
from .belief import BeliefState, random_belief
from .operational import exec_alt, exec_from_belief
from .predicates import GPredicate
from .syntax import (
    OBSERVABLE,
    UNOBSERVABLE,
    And,
    Assign,
    BinOp,
    Compare,
    Const,
    Diverge,
    If,
    Infer,
    Iverson,
    Not,
    Observe,
    Program,
    Sample,
    SampleSpec,
    Threshold,
    Var,
    VarDecl,
    While,
    bound_loops,
    format_program,
    seq,
)


@dataclass(frozen=True)
class Limits:
    max_unobservables: int = 3
    max_observables: int = 2
    max_domain: int = 3
    max_rows: int = 18
    max_statements: int = 8
    max_fuel: int = 3
    loop_probability: float = 0.25
    diverge_probability: float = 0.02


@dataclass(frozen=True)
class Case:
    """One corpus entry: program, loop fuel, initial belief and postexpectation."""

    program: Program
    fuel: int
    beta0: BeliefState
    post: GPredicate

    @property
    def body(self):
        return bound_loops(self.program.body, self.fuel)

    def describe(self) -> str:
        return f"// fuel {self.fuel}\n{format_program(self.program)}"


_WEIGHTS = (Q(1, 2), Q(1, 3), Q(1, 4), Q(2, 3), Q(3, 4), Q(1, 5), Q(2, 5), Q(3, 5))
_THRESHOLDS = (Q(1, 4), Q(1, 3), Q(1, 2), Q(2, 3), Q(3, 4))
_OPS = ("<", "<=", ">", ">=", "=", "!=")


class ProgramGenerator:
    def __init__(self, rng: random.Random, limits: Limits = Limits()):
        self.rng = rng
        self.limits = limits

    # -- declarations ----------------------------------------------------

    def declarations(self):
        rng, lim = self.rng, self.limits
        decls, rows = [], 1
        for i in range(rng.randint(1, lim.max_unobservables)):
            top = rng.randint(1, lim.max_domain)
            if rows * (top + 1) > lim.max_rows:
                top = 1
                if rows * 2 > lim.max_rows:
                    break
            rows *= top + 1
            decls.append(VarDecl(f"u{i}", UNOBSERVABLE, tuple(range(top + 1))))
        for i in range(rng.randint(1, lim.max_observables)):
            decls.append(VarDecl(f"o{i}", OBSERVABLE, None))
        return decls

    # -- expressions -------------------------------------------------------

    def obs_expr(self, depth=1):
        rng = self.rng
        choice = rng.random()
        if depth == 0 or choice < 0.4:
            if rng.random() < 0.6:
                return Var(rng.choice(self.obs))
            return Const(rng.randint(0, 2))
        op = rng.choice(("+", "-", "*"))
        return BinOp(op, self.obs_expr(depth - 1), self.obs_expr(depth - 1))

    def obs_prop(self):
        rng = self.rng
        p = Compare(rng.choice(_OPS), Var(rng.choice(self.obs)), Const(rng.randint(0, 2)))
        if rng.random() < 0.2:
            p = Not(p)
        return p

    def any_expr(self, depth=1):
        rng = self.rng
        names = self.unobs + self.obs
        if depth == 0 or rng.random() < 0.4:
            if rng.random() < 0.75:
                return Var(rng.choice(names))
            return Const(rng.randint(0, 3))
        if rng.random() < 0.25:
            return Iverson(self.any_prop())
        op = rng.choice(("+", "-", "*", "/"))
        return BinOp(op, self.any_expr(depth - 1), self.any_expr(depth - 1))

    def any_prop(self):
        rng = self.rng
        names = self.unobs + self.obs
        p = Compare(rng.choice(_OPS), Var(rng.choice(names)), Const(rng.randint(0, 2)))
        r = rng.random()
        if r < 0.15:
            p = And(p, Compare(rng.choice(_OPS), Var(rng.choice(names)), Const(rng.randint(0, 2))))
        elif r < 0.25:
            p = Not(p)
        return p

    def sample_value(self, x):
        """A value expression that stays inside ``x``'s domain on every row."""
        rng = self.rng
        top = self.domains[x][-1]
        options = [lambda: Const(rng.randint(0, top))]
        smaller = [y for y in self.unobs if self.domains[y][-1] <= top]
        if smaller:
            options.append(lambda: Var(rng.choice(smaller)))
            options.append(lambda: BinOp("-", Const(top), Var(rng.choice(smaller))))
        options.append(lambda: Iverson(self.obs_prop()) if top >= 1 else Const(0))
        return rng.choice(options)()

    def sample_spec(self, x):
        rng = self.rng
        k = rng.randint(1, 3)
        if k == 1:
            return SampleSpec(((Q(1), self.sample_value(x)),))
        weights = []
        rest = Q(1)
        for _ in range(k - 1):
            w = rng.choice(_WEIGHTS) * rest
            weights.append(w)
            rest -= w
        weights.append(rest)
        return SampleSpec(tuple((w, self.sample_value(x)) for w in weights))

    # -- statements --------------------------------------------------------

    def statement(self, budget: list, depth: int, in_loop: bool):
        rng, lim = self.rng, self.limits
        budget[0] -= 1
        r = rng.random()
        if depth < 2 and budget[0] > 1 and r < 0.15:
            return If(self.obs_prop(), self.block(budget, depth + 1, in_loop), self.block(budget, depth + 1, in_loop))
        if depth < 2 and budget[0] > 1 and r < 0.3:
            th = Threshold(rng.choice(_OPS), rng.choice(_THRESHOLDS))
            return Infer(self.any_prop(), th, self.block(budget, depth + 1, in_loop),
                         self.block(budget, depth + 1, in_loop))
        if depth < 2 and not in_loop and budget[0] > 1 and r < 0.3 + lim.loop_probability * 0.5:
            o = rng.choice(self.obs)
            body = seq(self.block(budget, depth + 1, True), Assign(o, BinOp("+", Var(o), Const(1))))
            return While(Compare("<", Var(o), Const(rng.randint(1, 3))), body)
        r = rng.random()
        if r < lim.diverge_probability:
            return Diverge()
        if r < 0.4:
            x = rng.choice(self.unobs)
            return Sample(x, self.sample_spec(x))
        if r < 0.75:
            return Observe(rng.choice(self.obs), rng.choice(self.unobs))
        return Assign(rng.choice(self.obs), self.obs_expr())

    def block(self, budget, depth, in_loop):
        n = self.rng.randint(1, 2)
        stmts = [self.statement(budget, depth, in_loop) for _ in range(n) if budget[0] > 0]
        return seq(*stmts) if stmts else self.leaf()

    def leaf(self):
        x = self.rng.choice(self.unobs)
        return Sample(x, self.sample_spec(x))

    def program(self) -> Program:
        decls = self.declarations()
        self.unobs = [d.name for d in decls if d.kind == UNOBSERVABLE]
        self.obs = [d.name for d in decls if d.kind == OBSERVABLE]
        self.domains = {d.name: d.domain for d in decls}
        budget = [self.rng.randint(2, self.limits.max_statements)]
        stmts = []
        while budget[0] > 0:
            stmts.append(self.statement(budget, 0, False))
        return Program((), tuple(decls), seq(*stmts))

    def post(self) -> GPredicate:
        if self.rng.random() < 0.5:
            return GPredicate.pr(self.any_prop())
        return GPredicate.ex(self.any_expr(2))


def generate_case(rng: random.Random, limits: Limits = Limits()) -> Case:
    gen = ProgramGenerator(rng, limits)
    prog = gen.program()
    fuel = rng.randint(1, limits.max_fuel)
    beta0 = random_belief(prog.signature, rng, max_support=6)
    return Case(prog, fuel, beta0, gen.post())


def generate_corpus(seed: int, count: int, limits: Limits = Limits()) -> list:
    rng = random.Random(seed)
    return [generate_case(rng, limits) for _ in range(count)]


# ---------------------------------------------------------------------------
# the three differential properties


def check_wp_soundness(case: Case) -> Optional[str]:
    """``wp(C, F)(beta0) = sum_beta [[C]](beta) * F(beta)``."""
    from .wp import wp_loopfree

    sig = case.program.signature
    body = case.body
    lhs = wp_loopfree(body, case.post, sig).evaluate(case.beta0)
    dist = exec_alt(body, case.beta0, sig=sig)
    rhs = dist.expectation(lambda b: _eval(case.post, b))
    if lhs != rhs:
        return f"wp gives {q_str(lhs)}, operational expectation {q_str(rhs)}"
    return None


def _eval(f, beta):
    from .predicates import eval_predicate

    return eval_predicate(f, beta)


def check_belief_accuracy(case: Case) -> Optional[str]:
    """Truths are distributed according to the belief they end in."""
    sig = case.program.signature
    joint = exec_from_belief(case.body, case.beta0, sig=sig)
    marg = joint.marginal()
    for beta, mass in marg.entries.items():
        for sigma, p in beta.items():
            got = joint[(beta, sigma)]
            if got != p * mass:
                return f"P({beta!r}, {sigma!r}) = {q_str(got)} but beta(sigma) * P(beta) = {q_str(p * mass)}"
    for (beta, sigma), got in joint.entries.items():
        if beta(sigma) == 0:
            return f"truth {sigma!r} outside the support of {beta!r}"
    return None


def check_operational_correctness(case: Case) -> Optional[str]:
    """Both semantics give the same distribution over final beliefs."""
    sig = case.program.signature
    a = exec_from_belief(case.body, case.beta0, sig=sig).marginal()
    b = exec_alt(case.body, case.beta0, sig=sig)
    if a.entries != b.entries or a.residual != b.residual:
        return f"semantics disagree: {a!r} vs {b!r}"
    return None


PROPERTIES = {
    "wp-soundness": check_wp_soundness,
    "belief-accuracy": check_belief_accuracy,
    "operational-correctness": check_operational_correctness,
}


@dataclass
class PropertyReport:
    name: str
    checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "property": self.name,
            "checked": self.checked,
            "failed": len(self.failures),
            "first_failure": self.failures[0] if self.failures else None,
        }


def difftest(seed: int, count: int, limits: Limits = Limits(), properties=None) -> list:
    """Run the differential properties over a fresh corpus."""
    names = list(properties or PROPERTIES)
    reports = {n: PropertyReport(n) for n in names}
    for case in generate_corpus(seed, count, limits):
        for n in names:
            reports[n].checked += 1
            msg = PROPERTIES[n](case)
            if msg is not None:
                reports[n].failures.append({"program": case.describe(), "message": msg})
    return [reports[n] for n in names]
