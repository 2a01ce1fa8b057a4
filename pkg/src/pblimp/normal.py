"""Canonical normal form for predicates over a fixed program signature.

Unobservable variables range over finite declared domains, so an expression
``E`` is determined, for the purpose of ``Ex(E)``, by its *table*: one entry
per combination of unobservable values ("row").  Each entry is what remains of
``E`` once the row's values are plugged in, i.e. an expression over the
observable variables only.  Because every consistent belief state fixes the
observable variables, ``Ex(E)(beta) = sum_row beta(row) * E_row(o)``.

Table entries (leaves) are linear combinations ``sum coeff * mono * key`` of
simplified observable expressions ``key`` with rational coefficients and
parameter monomials ``mono``.  A leaf is a frozenset of
``((key, mono), coeff)`` items, so equal leaves are equal objects.

A :class:`NormalForm` maps a context ``(facts, guards)`` to a table:

* facts are conditions on observable variables only (``[Pr(P_o) = 1]`` and
  friends), kept as ``(P, polarity)`` literals whenever possible;
* guards compare the expected values of two tables;
* the table is the linear atom, so terms sharing a context are merged.

The value at a consistent ``beta`` is the sum over contexts whose facts and
guards hold of ``Ex(table)(beta)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional

from ._rational import ONE, ZERO, Q
from .belief import BeliefState, compile_expr, compile_prop
from .errors import NotExpressible, ParameterError
from .poly import Poly
from .predicates import ONE_EXPR, GPredicate, Guard, Term
from .syntax import (
    NEGATED_COMPARE,
    And,
    BinOp,
    BoolConst,
    Compare,
    Const,
    Iverson,
    Not,
    Or,
    Var,
    WeightedSum,
    compare,
    expr_vars,
    simplify,
)

ONE_KEY = Const(1)
EMPTY = frozenset()

# ---------------------------------------------------------------------------
# leaves


def leaf_build(acc: dict) -> frozenset:
    return frozenset((k, v) for k, v in acc.items() if v != 0)


def _add_into(acc: dict, leaf, factor=ONE):
    for k, v in leaf:
        acc[k] = acc.get(k, ZERO) + v * factor


def leaf_const(c) -> frozenset:
    return leaf_build({(ONE_KEY, ()): Q(c)})


def leaf_of_obs_expr(e, coeff=ONE) -> frozenset:
    """Leaf for an observable-only expression (simplified)."""
    e = simplify(e)
    if isinstance(e, Const):
        return leaf_build({(ONE_KEY, ()): coeff * e.value})
    return leaf_build({(e, ()): Q(coeff)})


def leaf_add(a, b):
    if not a:
        return b
    if not b:
        return a
    acc = dict(a)
    _add_into(acc, b)
    return leaf_build(acc)


def leaf_scale(a, factor):
    if factor == 1:
        return a
    return leaf_build({k: v * factor for k, v in a})


def leaf_mul_poly(a, poly: Poly):
    acc = {}
    for (key, mono), v in a:
        for m2, c in poly.terms.items():
            k = (key, tuple(sorted(mono + m2)))
            acc[k] = acc.get(k, ZERO) + v * c
    return leaf_build(acc)


def leaf_map_keys(a, fn):
    """Apply ``fn`` to every observable key, folding constants."""
    acc = {}
    for (key, mono), v in a:
        new = simplify(fn(key))
        if isinstance(new, Const):
            if new.value == 0:
                continue
            k, v = (ONE_KEY, mono), v * new.value
        else:
            k = (new, mono)
        acc[k] = acc.get(k, ZERO) + v
    return leaf_build(acc)


def leaf_mul_obs(a, e):
    """Multiply by a natural-valued observable expression."""
    if e == ONE_KEY:
        return a
    return leaf_map_keys(a, lambda k: e if k == ONE_KEY else BinOp("*", k, e))


def leaf_is_const(a) -> bool:
    return all(key == ONE_KEY for (key, _), _v in a)


def leaf_poly(a) -> Poly:
    """Polynomial value of a constant leaf."""
    return Poly({mono: v for (key, mono), v in a})


def leaf_q(a):
    """Rational value of a constant, parameter-free leaf, else None."""
    total = ZERO
    for (key, mono), v in a:
        if key != ONE_KEY or mono:
            return None
        total += v
    return total


def leaf_vars(a) -> frozenset:
    out = set()
    for (key, mono), _ in a:
        out |= expr_vars(key)
    return frozenset(out)


def leaf_params(a) -> set:
    return {p for (key, mono), _ in a for p in mono}


def leaf_eval(a, values: tuple, names: tuple, params):
    total = ZERO
    for (key, mono), v in a:
        x = v
        for p in mono:
            try:
                x *= Q(params[p])
            except (KeyError, TypeError):
                raise ParameterError(f"parameter {p!r} is not bound") from None
        if key != ONE_KEY:
            x *= compile_expr(key, names)(values)
        total += x
    return total


def leaf_to_expr(a):
    """Expression with the same value as a parameter-free leaf."""
    items = []
    for (key, mono), v in sorted(a, key=lambda kv: repr(kv[0])):
        if mono:
            raise NotExpressible("parameters cannot appear inside expressions")
        items.append((v, key))
    if not items:
        return Const(0)
    if all(v.denominator == 1 and v > 0 for v, _ in items):
        e = None
        for v, key in items:
            part = key if v == 1 else (Const(int(v)) if key == ONE_KEY else BinOp("*", Const(int(v)), key))
            e = part if e is None else BinOp("+", e, part)
        return e
    return WeightedSum(tuple(items))


# ---------------------------------------------------------------------------
# per-signature context


def _subst_env(e, env: dict):
    if isinstance(e, Var):
        return env.get(e.name, e)
    if isinstance(e, (Const, BoolConst)):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, _subst_env(e.left, env), _subst_env(e.right, env))
    if isinstance(e, Compare):
        return Compare(e.op, _subst_env(e.left, env), _subst_env(e.right, env))
    if isinstance(e, (And, Or)):
        return type(e)(_subst_env(e.left, env), _subst_env(e.right, env))
    if isinstance(e, Not):
        return Not(_subst_env(e.operand, env))
    if isinstance(e, Iverson):
        return Iverson(_subst_env(e.prop, env))
    if isinstance(e, WeightedSum):
        return WeightedSum(tuple((w, _subst_env(s, env)) for w, s in e.items))
    raise TypeError(f"not an expression: {e!r}")


class Layout:
    """Row bookkeeping for one signature."""

    def __init__(self, sig):
        self.sig = sig
        self.names = sig.names
        self.unobs = sig.unobservables
        self.obs = sig.observables
        self.rows = sig.rows or ((),)
        self.nrows = len(self.rows)
        self.envs = [
            {n: Const(v) for n, v in zip(self.unobs, row)} for row in self.rows
        ]
        self.upos = [sig.index[n] for n in self.unobs]
        self._row_index = {row: i for i, row in enumerate(self.rows)}
        self._var_pos = {n: i for i, n in enumerate(self.unobs)}
        self.all_ones = tuple(leaf_const(1) for _ in self.rows)
        self.zeros = tuple(EMPTY for _ in self.rows)

    def __eq__(self, other):
        return isinstance(other, Layout) and self.sig == other.sig

    def __hash__(self):
        return hash(self.sig)

    def row_of_values(self, values: tuple) -> int:
        return self._row_index[tuple(values[i] for i in self.upos)]

    def row_with(self, ri: int, x: str, c: int) -> Optional[int]:
        row = list(self.rows[ri])
        row[self._var_pos[x]] = c
        return self._row_index.get(tuple(row))

    def var_value(self, ri: int, x: str) -> int:
        return self.rows[ri][self._var_pos[x]]

    # -- tables ------------------------------------------------------------

    def table(self, e) -> tuple:
        return _table_of(self, e)

    def expr_leaf(self, e, env):
        if isinstance(e, WeightedSum):
            acc = {}
            for w, sub in e.items:
                _add_into(acc, self.expr_leaf(sub, env), w)
            return leaf_build(acc)
        return leaf_of_obs_expr(_subst_env(e, env))

    def prop_table(self, p) -> tuple:
        return self.table(Iverson(p))

    def row_constant(self, table) -> bool:
        first = table[0]
        return all(leaf == first for leaf in table)

    def table_unobs_deps(self, table) -> frozenset:
        return _unobs_deps(self, table)

    def table_vars(self, table) -> frozenset:
        out = set(self.table_unobs_deps(table))
        for leaf in set(table):
            out |= leaf_vars(leaf)
        return frozenset(out)

    def ex(self, table, beta: BeliefState, params):
        total = ZERO
        for values, p in beta.entries:
            leaf = table[self.row_of_values(values)]
            if leaf:
                total += p * leaf_eval(leaf, values, beta.names, params)
        return total


@lru_cache(maxsize=None)
def _table_of(layout: Layout, e) -> tuple:
    return tuple(layout.expr_leaf(e, env) for env in layout.envs)


@lru_cache(maxsize=None)
def _unobs_deps(layout: Layout, table) -> frozenset:
    deps = set()
    for x in layout.unobs:
        dom = layout.sig.domains[x]
        for ri in range(layout.nrows):
            if layout.var_value(ri, x) != dom[0]:
                continue
            base = table[ri]
            if any(table[layout.row_with(ri, x, c)] != base for c in dom[1:]):
                deps.add(x)
                break
    return frozenset(deps)


def table_add(a, b):
    return tuple(leaf_add(x, y) for x, y in zip(a, b))


def table_scale(a, factor):
    return tuple(leaf_scale(x, factor) for x in a)


def table_mul_poly(a, poly: Poly):
    return tuple(leaf_mul_poly(x, poly) for x in a)


def table_is_zero(a) -> bool:
    return all(not leaf for leaf in a)


def table_subst_obs(a, x: str, e):
    """Observable assignment ``x := e`` applied inside every leaf."""
    return tuple(leaf_map_keys(leaf, lambda k: _subst_env(k, {x: e})) if leaf else leaf for leaf in a)


def table_sample(layout: Layout, a, x: str, spec):
    """``T <- f`` for ``x ~ f``: mix the rows reached by each branch value."""
    dom = layout.sig.domains[x]
    out = []
    for ri, env in enumerate(layout.envs):
        acc = {}
        for w, value in spec.branches:
            v = simplify(_subst_env(value, env))
            if isinstance(v, Const):
                target = layout.row_with(ri, x, v.value)
                if target is not None:
                    _add_into(acc, a[target], w)
            else:
                for c in dom:
                    ind = Iverson(Compare("=", v, Const(c)))
                    _add_into(acc, leaf_mul_obs(a[layout.row_with(ri, x, c)], ind), w)
        out.append(leaf_build(acc))
    return tuple(out)


def table_mask(layout: Layout, a, x: str, c: int):
    return tuple(
        leaf if layout.var_value(ri, x) == c else EMPTY for ri, leaf in enumerate(a)
    )


# ---------------------------------------------------------------------------
# facts and guards


@dataclass(frozen=True)
class PropFact:
    """Observable proposition ``prop`` holds (``polarity``) or fails."""

    prop: object
    polarity: bool

    def vars(self):
        return expr_vars(self.prop)


@dataclass(frozen=True)
class LeafFact:
    """``lhs op coeff * rhs`` over observable-only leaves."""

    lhs: frozenset
    op: str
    coeff: object
    rhs: frozenset

    def vars(self):
        return leaf_vars(self.lhs) | leaf_vars(self.rhs)


@dataclass(frozen=True)
class TGuard:
    """``[Ex(lhs) op coeff * Ex(rhs)]`` over tables."""

    lhs: tuple
    op: str
    coeff: object
    rhs: tuple

    def negate(self) -> "TGuard":
        return TGuard(self.lhs, NEGATED_COMPARE[self.op], self.coeff, self.rhs)


_FLIP = {"!=": "=", ">=": "<", ">": "<="}


def make_prop_fact(prop, polarity: bool):
    """Canonical literal, or a bool when the proposition is constant."""
    prop = simplify(prop)
    while True:
        if isinstance(prop, BoolConst):
            return bool(prop.value) == polarity
        if isinstance(prop, Not):
            prop, polarity = prop.operand, not polarity
            continue
        if isinstance(prop, Compare) and prop.op in _FLIP:
            prop, polarity = Compare(_FLIP[prop.op], prop.left, prop.right), not polarity
            continue
        return PropFact(prop, polarity)


def _zero_one_key(leaf):
    """The proposition P if ``leaf`` is exactly ``[P]``."""
    if len(leaf) != 1:
        return None
    ((key, mono), v), = leaf
    if mono or v != 1:
        return None
    if isinstance(key, Iverson):
        return key.prop
    return None


def make_leaf_fact(lhs, op, coeff, rhs):
    """Fact for a guard whose two tables are row-constant."""
    lq, rq = leaf_q(lhs), leaf_q(rhs)
    if lq is not None and rq is not None and not isinstance(coeff, str):
        return compare(op, lq, coeff * rq)
    if rq == 1 and not isinstance(coeff, str):
        prop = _zero_one_key(lhs)
        if prop is not None:
            t1, t0 = compare(op, 1, coeff), compare(op, 0, coeff)
            if t1 and t0:
                return True
            if not t1 and not t0:
                return False
            return make_prop_fact(prop, t1)
    return LeafFact(lhs, op, coeff, rhs)


def make_guard(layout: Layout, g: TGuard):
    """A table guard, demoted to a fact (or a bool) when it is observable-only."""
    if layout.row_constant(g.lhs) and layout.row_constant(g.rhs):
        return make_leaf_fact(g.lhs[0], g.op, g.coeff, g.rhs[0])
    return g


def _fact_holds(f, values, names, params) -> bool:
    if isinstance(f, PropFact):
        return bool(compile_prop(f.prop, names)(values)) == f.polarity
    left = leaf_eval(f.lhs, values, names, params)
    right = _coeff(f.coeff, params) * leaf_eval(f.rhs, values, names, params)
    return compare(f.op, left, right)


def _coeff(c, params):
    if isinstance(c, str):
        try:
            return Q(params[c])
        except (KeyError, TypeError):
            raise ParameterError(f"parameter {c!r} is not bound") from None
    return c


def _contradicts(item, others) -> bool:
    if isinstance(item, PropFact):
        return PropFact(item.prop, not item.polarity) in others
    if isinstance(item, TGuard):
        return item.negate() in others
    if isinstance(item, LeafFact):
        return LeafFact(item.lhs, NEGATED_COMPARE[item.op], item.coeff, item.rhs) in others
    return False


def build_context(layout: Layout, items):
    """Normalize facts/guards into a context key, or None when contradictory."""
    facts, guards = set(), set()
    for it in items:
        if isinstance(it, TGuard):
            it = make_guard(layout, it)
        if it is True:
            continue
        if it is False:
            return None
        target = guards if isinstance(it, TGuard) else facts
        if _contradicts(it, target):
            return None
        target.add(it)
    return (frozenset(facts), frozenset(guards))


# ---------------------------------------------------------------------------
# normal forms


class NormalForm:
    """Sum over contexts of guarded expected values of tables."""

    __slots__ = ("layout", "terms")

    def __init__(self, layout: Layout, terms: Optional[dict] = None):
        self.layout = layout
        self.terms = {k: t for k, t in (terms or {}).items() if not table_is_zero(t)}

    # -- construction --------------------------------------------------

    @classmethod
    def zero(cls, layout: Layout) -> "NormalForm":
        return cls(layout, {})

    @classmethod
    def from_gpredicate(cls, f: GPredicate, layout: Layout) -> "NormalForm":
        acc = {}
        for t in f.terms:
            if t.denom is not None:
                raise NotExpressible("quotients are resolved by the observe rule, not normalized")
            items = [
                TGuard(layout.table(g.lhs), g.op, g.coeff, layout.table(g.rhs)) for g in t.guards
            ]
            key = build_context(layout, items)
            if key is None:
                continue
            table = table_mul_poly(layout.table(t.atom), t.scalar)
            acc[key] = table_add(acc[key], table) if key in acc else table
        return cls(layout, acc)

    # -- algebra -------------------------------------------------------

    def __add__(self, other: "NormalForm") -> "NormalForm":
        acc = dict(self.terms)
        for k, t in other.terms.items():
            acc[k] = table_add(acc[k], t) if k in acc else t
        return NormalForm(self.layout, acc)

    def scale(self, factor) -> "NormalForm":
        poly = Poly.of(factor)
        return NormalForm(self.layout, {k: table_mul_poly(t, poly) for k, t in self.terms.items()})

    def __neg__(self) -> "NormalForm":
        return self.scale(Poly.const(-1))

    def __sub__(self, other: "NormalForm") -> "NormalForm":
        return self + (-other)

    def __eq__(self, other):
        return isinstance(other, NormalForm) and self.layout == other.layout and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __len__(self):
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def with_item(self, item) -> "NormalForm":
        """Multiply every term by one more fact or guard."""
        acc = {}
        for (facts, guards), t in self.terms.items():
            key = build_context(self.layout, list(facts) + list(guards) + [item])
            if key is None:
                continue
            acc[key] = table_add(acc[key], t) if key in acc else t
        return NormalForm(self.layout, acc)

    def transform(self, table_fn, fact_fn) -> "NormalForm":
        """Apply a substitution to every table (atoms and guard sides) and fact."""
        acc = {}
        for (facts, guards), t in self.terms.items():
            items = [fact_fn(f) for f in facts]
            items += [TGuard(table_fn(g.lhs), g.op, g.coeff, table_fn(g.rhs)) for g in guards]
            key = build_context(self.layout, items)
            if key is None:
                continue
            nt = table_fn(t)
            if table_is_zero(nt):
                continue
            acc[key] = table_add(acc[key], nt) if key in acc else nt
        return NormalForm(self.layout, acc)

    # -- inspection ----------------------------------------------------

    def context_vars(self, key) -> frozenset:
        facts, guards = key
        out = set()
        for f in facts:
            out |= f.vars()
        for g in guards:
            out |= self.layout.table_vars(g.lhs) | self.layout.table_vars(g.rhs)
        return frozenset(out)

    def term_vars(self, key) -> frozenset:
        return self.context_vars(key) | self.layout.table_vars(self.terms[key])

    def free_vars(self) -> frozenset:
        out = set()
        for k in self.terms:
            out |= self.term_vars(k)
        return frozenset(out)

    def params(self) -> set:
        out = set()
        for (facts, guards), t in self.terms.items():
            for leaf in t:
                out |= leaf_params(leaf)
            for g in list(facts) + list(guards):
                if isinstance(getattr(g, "coeff", None), str):
                    out.add(g.coeff)
        return out

    # -- evaluation ----------------------------------------------------

    def evaluate(self, beta: BeliefState, params: Optional[Mapping] = None):
        params = params or {}
        if not beta.entries:
            return ZERO
        values0 = beta.entries[0][0]
        total = ZERO
        lay = self.layout
        for (facts, guards), t in self.terms.items():
            if not all(_fact_holds(f, values0, beta.names, params) for f in facts):
                continue
            ok = True
            for g in guards:
                left = lay.ex(g.lhs, beta, params)
                right = _coeff(g.coeff, params) * lay.ex(g.rhs, beta, params)
                if not compare(g.op, left, right):
                    ok = False
                    break
            if ok:
                total += lay.ex(t, beta, params)
        return total

    # -- rendering -----------------------------------------------------

    def to_gpredicate(self) -> GPredicate:
        terms = []
        for key in sorted(self.terms, key=_context_sort_key):
            facts, guards = key
            gs = [_fact_to_guard(self.layout, f) for f in sorted(facts, key=repr)]
            gs += [
                Guard(table_to_expr(self.layout, g.lhs), g.op, g.coeff, table_to_expr(self.layout, g.rhs))
                for g in sorted(guards, key=repr)
            ]
            for scalar, atom in _table_terms(self.layout, self.terms[key]):
                terms.append(Term(scalar, tuple(gs), atom))
        return GPredicate(tuple(terms))

    def __str__(self):
        from .predicates import format_predicate

        return format_predicate(self.to_gpredicate())

    def __repr__(self):
        return f"NormalForm({self})"


def _context_sort_key(key):
    facts, guards = key
    return (len(facts) + len(guards), repr(sorted(map(repr, facts))), repr(sorted(map(repr, guards))))


def _fact_to_guard(layout, f) -> Guard:
    if isinstance(f, PropFact):
        return Guard(Iverson(f.prop), "=", ONE if f.polarity else ZERO, ONE_EXPR)
    return Guard(leaf_to_expr(f.lhs), f.op, f.coeff, leaf_to_expr(f.rhs))


def _row_prop(layout: Layout, rows: set):
    """Proposition over unobservable variables that holds exactly on ``rows``."""
    if len(rows) == layout.nrows:
        return BoolConst(1)
    if not rows:
        return BoolConst(0)
    indicator = tuple(leaf_const(1) if i in rows else EMPTY for i in range(layout.nrows))
    deps = [x for x in layout.unobs if x in layout.table_unobs_deps(indicator)]
    pos = [layout.unobs.index(x) for x in deps]
    projections = sorted({tuple(layout.rows[i][p] for p in pos) for i in rows})
    if len(deps) == 1:
        x = deps[0]
        dom = layout.sig.domains[x]
        values = [v[0] for v in projections]
        missing = [c for c in dom if c not in values]
        if len(missing) == 1 and len(values) > 1:
            return Compare("!=", Var(x), Const(missing[0]))
    disj = None
    for proj in projections:
        conj = None
        for x, v in zip(deps, proj):
            c = Compare("=", Var(x), Const(v))
            conj = c if conj is None else And(conj, c)
        disj = conj if disj is None else Or(disj, conj)
    return disj


def _table_groups(layout: Layout, table):
    """Group rows by ``(key, mono) -> coefficient``."""
    groups = {}
    for ri, leaf in enumerate(table):
        for (key, mono), v in leaf:
            groups.setdefault((key, mono, v), set()).add(ri)
    return groups


def _with_rows(layout, key, rows):
    prop = _row_prop(layout, rows)
    if isinstance(prop, BoolConst):
        return key
    ind = Iverson(prop)
    return ind if key == ONE_KEY else BinOp("*", ind, key)


def _table_terms(layout: Layout, table):
    """Split a table into ``(scalar, atom)`` pairs, one per coefficient group."""
    out = []
    groups = _table_groups(layout, table)
    for (key, mono, v) in sorted(groups, key=lambda g: (repr(g[1]), repr(g[0]), g[2])):
        rows = groups[(key, mono, v)]
        scalar = Poly({mono: v})
        out.append((scalar, _with_rows(layout, key, rows)))
    return out


def table_to_expr(layout: Layout, table):
    """A parameter-free expression whose table is ``table``."""
    if table == layout.all_ones:
        return ONE_EXPR
    groups = _table_groups(layout, table)
    items = []
    for (key, mono, v) in sorted(groups, key=lambda g: (repr(g[0]), g[2])):
        if mono:
            raise NotExpressible("parameters cannot appear inside guards")
        items.append((v, _with_rows(layout, key, groups[(key, mono, v)])))
    if not items:
        return Const(0)
    if all(v == 1 for v, _ in items) and len(items) == 1:
        return items[0][1]
    if all(v.denominator == 1 and v > 0 for v, _ in items):
        e = None
        for v, sub in items:
            part = sub if v == 1 else BinOp("*", Const(int(v)), sub)
            e = part if e is None else BinOp("+", e, part)
        return e
    return WeightedSum(tuple(items))


def normalize(f, sig) -> NormalForm:
    """Normal form of a predicate over ``sig``; idempotent on normal forms."""
    if isinstance(f, NormalForm):
        return f
    return NormalForm.from_gpredicate(f, layout_for(sig))


@lru_cache(maxsize=None)
def layout_for(sig) -> Layout:
    return Layout(sig)
