"""Predicates over belief states built from expected values.

A :class:`GPredicate` is a finite sum of terms ``scalar * [g1] * ... * Ex(E)``
where each guard ``[Ex(E1) op k * Ex(E2)]`` compares two expected values and
``k`` is a rational constant or a parameter.  ``Pr(P)`` abbreviates
``Ex([P])``.  Scalars are polynomials in the parameters.

This module holds the syntactic representation, its evaluation, the three
substitution rewrites used by the calculus (assignment, conditioning,
sampling) and the textual predicate syntax.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from ._rational import ONE, ZERO, Q, q_short
from .belief import BeliefState, expect
from .errors import NotExpressible, ParameterError
from .parser import TokenParser, _describe
from .poly import ONE_POLY, Poly, format_poly
from .syntax import (
    COMPARE_OPS,
    NEGATED_COMPARE,
    BinOp,
    Compare,
    Const,
    Iverson,
    Var,
    WeightedSum,
    compare,
    expr_vars,
    format_expr,
    format_prop,
    simplify,
    substitute,
)

ONE_EXPR = Const(1)


@dataclass(frozen=True)
class Guard:
    """``[Ex(lhs) op coeff * Ex(rhs)]``; ``coeff`` is a rational or a parameter name."""

    lhs: object
    op: str
    coeff: object
    rhs: object = ONE_EXPR

    def negate(self) -> "Guard":
        return Guard(self.lhs, NEGATED_COMPARE[self.op], self.coeff, self.rhs)


@dataclass(frozen=True)
class Term:
    scalar: Poly = ONE_POLY
    guards: tuple = ()
    atom: object = ONE_EXPR
    denom: Optional[object] = None  # Ex(atom) / Ex(denom) when set


@dataclass(frozen=True)
class GPredicate:
    terms: tuple = ()

    @classmethod
    def ex(cls, e, scalar=ONE_POLY) -> "GPredicate":
        return cls((Term(Poly.of(scalar), (), e),))

    @classmethod
    def pr(cls, p, scalar=ONE_POLY) -> "GPredicate":
        return cls.ex(Iverson(p), scalar)

    @classmethod
    def const(cls, c) -> "GPredicate":
        return cls((Term(Poly.of(c), (), ONE_EXPR),))

    def __add__(self, other: "GPredicate") -> "GPredicate":
        return GPredicate(self.terms + other.terms)

    def scale(self, factor) -> "GPredicate":
        f = Poly.of(factor)
        return GPredicate(tuple(Term(t.scalar * f, t.guards, t.atom, t.denom) for t in self.terms))

    def guarded(self, guard: Guard) -> "GPredicate":
        return GPredicate(tuple(Term(t.scalar, t.guards + (guard,), t.atom, t.denom) for t in self.terms))

    def is_zero(self) -> bool:
        return not self.terms

    def free_vars(self) -> frozenset:
        out = set()
        for t in self.terms:
            out |= expr_vars(t.atom)
            if t.denom is not None:
                out |= expr_vars(t.denom)
            for g in t.guards:
                out |= expr_vars(g.lhs) | expr_vars(g.rhs)
        return frozenset(out)

    def params(self) -> set:
        out = set()
        for t in self.terms:
            out |= t.scalar.params()
            out |= {g.coeff for g in t.guards if isinstance(g.coeff, str)}
        return out

    def __str__(self):
        return format_predicate(self)


ZERO_PREDICATE = GPredicate(())


# ---------------------------------------------------------------------------
# evaluation


def eval_ex(e, beta: BeliefState):
    """``Ex(E)(beta)``: the expected value of ``E`` under ``beta``."""
    return expect(beta, e)


def _coeff_value(coeff, params):
    if isinstance(coeff, str):
        if not params or coeff not in params:
            raise ParameterError(f"parameter {coeff!r} is not bound")
        return Q(params[coeff])
    return coeff


def eval_guard(g: Guard, beta: BeliefState, params: Optional[Mapping] = None) -> int:
    left = expect(beta, g.lhs)
    right = _coeff_value(g.coeff, params) * expect(beta, g.rhs)
    return 1 if compare(g.op, left, right) else 0


def eval_term(t: Term, beta: BeliefState, params: Optional[Mapping] = None):
    for g in t.guards:
        if not eval_guard(g, beta, params):
            return ZERO
    scalar = t.scalar.evaluate(params or {})
    if scalar == 0:
        return ZERO
    value = expect(beta, t.atom)
    if t.denom is not None:
        d = expect(beta, t.denom)
        value = value / d if d != 0 else ZERO
    return scalar * value


def eval_predicate(f, beta: BeliefState, params: Optional[Mapping] = None):
    """Value of a predicate (syntactic or normal form) at ``beta``."""
    if not isinstance(f, GPredicate):
        return f.evaluate(beta, params)
    return sum((eval_term(t, beta, params) for t in f.terms), ZERO)


# ---------------------------------------------------------------------------
# rewrites


def _map_exprs(f: GPredicate, fn, denom_fn=None) -> GPredicate:
    terms = []
    for t in f.terms:
        guards = tuple(Guard(fn(g.lhs), g.op, g.coeff, fn(g.rhs)) for g in t.guards)
        denom = t.denom
        if denom_fn is not None:
            denom = denom_fn(denom)
        elif denom is not None:
            denom = fn(denom)
        terms.append(Term(t.scalar, guards, fn(t.atom), denom))
    return GPredicate(tuple(terms))


def rewrite_assign(f: GPredicate, x: str, e) -> GPredicate:
    """``F[x -> E']``: substitute ``E'`` for ``x`` in every atom and guard side."""
    return _map_exprs(f, lambda a: simplify(substitute(a, x, e)))


def mask(e, x: str, c: int):
    """``E * [x = c]``, distributed over weighted sums."""
    ind = Iverson(Compare("=", Var(x), Const(c)))
    if isinstance(e, WeightedSum):
        return WeightedSum(tuple((w, mask(sub, x, c)) for w, sub in e.items))
    if e == ONE_EXPR:
        return ind
    return BinOp("*", e, ind)


def rewrite_observe(f: GPredicate, x: str, c: int) -> GPredicate:
    """``F|_{x=c}``: atoms become ``Ex(E*[x=c]) / Ex([x=c])``.

    Guards compare both sides multiplied by ``[x = c]``; the common
    denominator ``Ex([x=c])`` cancels there.
    """
    ind = Iverson(Compare("=", Var(x), Const(c)))

    def denom(d):
        return ind if d is None else mask(d, x, c)

    return _map_exprs(f, lambda a: mask(a, x, c), denom)


def sample_expr(e, x: str, spec):
    """``E <- f``: the weighted sum of ``E[x / E_i]``."""
    items = []
    sources = e.items if isinstance(e, WeightedSum) else ((ONE, e),)
    for w, sub in sources:
        for p, value in spec.branches:
            items.append((w * p, substitute(sub, x, value)))
    return simplify(WeightedSum(tuple(items)))


def rewrite_sample(f: GPredicate, x: str, spec) -> GPredicate:
    """``F[x -> f]``: replace every atom and guard side ``E`` by ``E <- f``."""
    return _map_exprs(f, lambda a: sample_expr(a, x, spec))


# ---------------------------------------------------------------------------
# text syntax


def _fmt_coeff(c) -> str:
    return c if isinstance(c, str) else q_short(c)


def _fmt_ex(e) -> str:
    if isinstance(e, Iverson):
        return f"Pr({format_prop(e.prop)})"
    return f"Ex({format_expr(e)})"


def format_guard(g: Guard) -> str:
    if g.rhs == ONE_EXPR:
        return f"[{_fmt_ex(g.lhs)} {g.op} {_fmt_coeff(g.coeff)}]"
    return f"[{_fmt_ex(g.lhs)} {g.op} {_fmt_coeff(g.coeff)} * {_fmt_ex(g.rhs)}]"


def format_term(t: Term) -> str:
    factors = []
    scalar = t.scalar
    if scalar != ONE_POLY:
        text = format_poly(scalar)
        factors.append(f"({text})" if " + " in text else text)
    factors.extend(format_guard(g) for g in t.guards)
    atom_is_one = t.atom == ONE_EXPR and t.denom is None
    if not atom_is_one or not factors:
        text = _fmt_ex(t.atom)
        if t.denom is not None:
            text = f"{text} / {_fmt_ex(t.denom)}"
        factors.append(text)
    return " * ".join(factors)


def format_predicate(f: GPredicate) -> str:
    if not f.terms:
        return "0"
    return " + ".join(format_term(t) for t in f.terms)


class PredicateParser(TokenParser):
    """Parser for the predicate syntax.

    ::

        pred   := term ('+' term)*
        term   := factor ('*' factor)*
        factor := number ['/' number] | param | 'Pr' '(' prop ')' | 'Ex' '(' expr ')'
                | ex_atom '/' ex_atom | '[' guard ']' | '(' pred ')' | '(' '1' '-' 'Pr' '(' prop ')' ')'
        guard  := ex_atom op (number | param) ['*' ex_atom]
        ex_atom := 'Pr' '(' prop ')' | 'Ex' '(' expr ')'

    A product may contain at most one expected value over unobservable
    variables; ``Pr(P)`` factors with ``P`` observable are turned into guards
    ``[Pr(P) = 1]`` and ``(1 - Pr(P))`` into ``[Pr(P) = 0]``.
    """

    extended = True

    def __init__(self, text: str, params=(), observables=None):
        super().__init__(text)
        self.param_names = set(params)
        self.observables = None if observables is None else set(observables)

    def _is_observable(self, e) -> bool:
        if self.observables is None:
            return False
        return expr_vars(e) <= self.observables

    def predicate(self) -> GPredicate:
        terms = list(self.summand())
        while self.accept("+"):
            terms.extend(self.summand())
        done = (self._finish(t) for t in terms)
        return GPredicate(tuple(t for t in done if not t.scalar.is_zero()))

    # a partial term is (scalar, guards, atoms, denom)
    def summand(self):
        partials = self.pred_factor()
        while self.accept("*"):
            right = self.pred_factor()
            partials = [self._mul(a, b) for a in partials for b in right]
        return partials

    def _mul(self, a, b):
        if a[3] is not None and b[3] is not None:
            raise self.error("a product may contain at most one quotient")
        return (a[0] * b[0], a[1] + b[1], a[2] + b[2], a[3] if a[3] is not None else b[3])

    def _finish(self, partial) -> Term:
        scalar, guards, atoms, denom = partial
        guards = list(guards)
        atoms = list(atoms)
        if len(atoms) > 1:
            keep = []
            for a in atoms:
                if isinstance(a, Iverson) and self._is_observable(a):
                    guards.append(Guard(a, "=", ONE, ONE_EXPR))
                else:
                    keep.append(a)
            if not keep:
                keep = [guards.pop().lhs]
            if len(keep) > 1:
                raise NotExpressible("a term may contain only one expected value over unobservable variables")
            atoms = keep
        atom = atoms[0] if atoms else ONE_EXPR
        return Term(scalar, tuple(guards), atom, denom)

    def pred_factor(self):
        t = self.tok
        if t.kind == "num":
            value = self.rational()
            return [(Poly.const(value), (), (), None)]
        if t.kind == "ident" and t.text in ("Pr", "Ex") and self.peek().text == "(":
            atom = self.ex_atom()
            if self.at("/") and self.peek().text in ("Pr", "Ex"):
                self.advance()
                denom = self.ex_atom()
                return [(ONE_POLY, (), (atom,), denom)]
            return [(ONE_POLY, (), (atom,), None)]
        if t.kind == "ident":
            if t.text not in self.param_names:
                raise self.error(f"unknown parameter {t.text!r}", ["Pr", "Ex", "parameter", "number"])
            self.advance()
            return [(Poly.param(t.text), (), (), None)]
        if self.accept("["):
            g = self.guard()
            self.expect("]")
            return [(ONE_POLY, (g,), (), None)]
        if self.accept("("):
            if self.tok.kind == "num" and self.tok.text == "1" and self.peek().text == "-":
                start = self.tok
                self.advance()
                self.advance()
                atom = self.ex_atom()
                self.expect(")")
                if not (isinstance(atom, Iverson) and self._is_observable(atom)):
                    raise self.error("(1 - Pr(P)) needs an observable proposition P", tok=start)
                return [(ONE_POLY, (Guard(atom, "=", ZERO, ONE_EXPR),), (), None)]
            inner = self.predicate()
            self.expect(")")
            return [(t_.scalar, t_.guards, () if t_.atom == ONE_EXPR else (t_.atom,), t_.denom) for t_ in inner.terms] or [
                (Poly(), (), (), None)
            ]
        raise self.error(f"unexpected {_describe(t)}", ["Pr", "Ex", "[", "(", "number", "parameter"])

    def ex_atom(self):
        name = self.ident()
        self.expect("(")
        if name == "Pr":
            e = Iverson(self.prop())
        else:
            e = self.expr()
        self.expect(")")
        return e

    def guard(self) -> Guard:
        lhs = self.ex_atom()
        t = self.tok
        if not (t.kind == "op" and (t.text in COMPARE_OPS or t.text == "==")):
            raise self.error(f"unexpected {_describe(t)}", list(COMPARE_OPS))
        op = "=" if self.advance().text == "==" else t.text
        if self.tok.kind == "ident" and self.tok.text in ("Pr", "Ex"):
            return Guard(lhs, op, ONE, self.ex_atom())
        if self.tok.kind == "ident":
            name = self.ident()
            if name not in self.param_names:
                raise self.error(f"unknown parameter {name!r}")
            coeff = name
        else:
            coeff = self.rational()
        rhs = ONE_EXPR
        if self.accept("*"):
            rhs = self.ex_atom()
        return Guard(lhs, op, coeff, rhs)


def parse_predicate(text: str, sig=None, params=None) -> GPredicate:
    """Parse predicate text; ``sig`` supplies parameter and observable names."""
    if params is None:
        params = sig.params if sig is not None else ()
    observables = sig.observables if sig is not None else None
    p = PredicateParser(text, params, observables)
    f = p.predicate()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {_describe(p.tok)}", ["+", "*", "end of input"])
    return f
