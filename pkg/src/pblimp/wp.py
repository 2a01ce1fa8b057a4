"""Weakest pre-expectations, loop bounds and the loop-invariant checker.

All transformers work on :class:`~pblimp.normal.NormalForm` values, the
canonical representation of grammar-G predicates over a program signature.
Inputs may be given as :class:`~pblimp.predicates.GPredicate` (or predicate
text via :func:`~pblimp.predicates.parse_predicate`); they are normalized on
entry.  ``NormalForm.to_gpredicate()`` converts results back.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Mapping, Optional, Union

from ._rational import ONE, ZERO, Q, q_str
from .belief import (
    BeliefState,
    Assignment,
    assign_update,
    compile_prop,
    observe_update,
    prob,
    random_belief,
    sample_update,
)
from .errors import (
    DomainRequired,
    MixedStrategies,
    NotExpressible,
    StrategyMissing,
    UnprovedInvariant,
)
from .normal import (
    EMPTY,
    ONE_KEY,
    LeafFact,
    NormalForm,
    PropFact,
    TGuard,
    _subst_env,
    leaf_map_keys,
    leaf_mul_poly,
    leaf_poly,
    leaf_q,
    leaf_scale,
    layout_for,
    make_leaf_fact,
    make_prop_fact,
    normalize,
    table_add,
    table_mask,
    table_sample,
    table_subst_obs,
)
from .operational import resolve_threshold
from .poly import Poly
from .syntax import (
    NEGATED_COMPARE,
    Assign,
    Const,
    Diverge,
    If,
    Infer,
    Iverson,
    Observe,
    Program,
    Sample,
    SampleSpec,
    Seq,
    Skip,
    While,
    compare,
    contains_diverge,
    is_loop_free,
    loops_of,
    substitute,
)


def _signature(ctx):
    return ctx.signature if isinstance(ctx, Program) else ctx


# ---------------------------------------------------------------------------
# strategies and results


@dataclass(frozen=True)
class Unroll:
    """Lower bound ``Phi^n(0)``."""

    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("unroll depth must be non-negative")


@dataclass(frozen=True)
class Invariant:
    """Upper bound by a (checked) invariant."""

    predicate: object


LoopStrategy = Union[Unroll, Invariant]

LOWER = "LowerBound"
UPPER = "UpperBound"
EXACT = "Exact"


@dataclass(frozen=True)
class Proved:
    status = "Proved"

    def to_json(self) -> dict:
        return {"status": self.status}


@dataclass(frozen=True)
class Falsified:
    witness: BeliefState
    params: dict
    lhs: object
    rhs: object
    status = "Falsified"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "witness": self.witness.to_json(),
            "params": {k: q_str(v) for k, v in sorted(self.params.items())},
            "lhs": q_str(self.lhs),
            "rhs": q_str(self.rhs),
        }


@dataclass(frozen=True)
class Unknown:
    reason: str
    status = "Unknown"

    def to_json(self) -> dict:
        return {"status": self.status, "reason": self.reason}


CheckResult = Union[Proved, Falsified, Unknown]


class _NoChange:
    def __repr__(self):
        return "NoChange"


NoChange = _NoChange()


@dataclass
class Bound:
    """Result of :func:`bound_program`."""

    predicate: NormalForm
    tag: str

    def evaluate(self, beta: BeliefState, params: Optional[Mapping] = None):
        return self.predicate.evaluate(beta, params)


# ---------------------------------------------------------------------------
# variables touched by a statement


# stands for "every unobservable variable" when no signature is given
ALL_UNOBSERVABLE = "*unobservable*"


def mod_set(stmt, sig=None) -> frozenset:
    """Variables a statement may change.

    An observation conditions the whole belief, so it counts as touching every
    unobservable variable; with ``sig`` that set is spelled out, otherwise it
    is represented by :data:`ALL_UNOBSERVABLE`.
    """
    out = set(_mod_set(stmt))
    if sig is not None and ALL_UNOBSERVABLE in out:
        out.discard(ALL_UNOBSERVABLE)
        out |= set(_signature(sig).unobservables)
    return frozenset(out)


def _mod_set(stmt) -> frozenset:
    if isinstance(stmt, (Assign, Sample)):
        return frozenset({stmt.target})
    if isinstance(stmt, Observe):
        out = {ALL_UNOBSERVABLE, stmt.source}
        if stmt.target:
            out.add(stmt.target)
        return frozenset(out)
    if isinstance(stmt, Seq):
        return _mod_set(stmt.first) | _mod_set(stmt.second)
    if isinstance(stmt, (If, Infer)):
        return _mod_set(stmt.then) | _mod_set(stmt.orelse)
    if isinstance(stmt, While):
        return _mod_set(stmt.body)
    return frozenset()


def _independence_applies(stmt) -> bool:
    return is_loop_free(stmt) and not contains_diverge(stmt)


def simplify_independent(stmt, f, sig):
    """``f`` itself when ``stmt`` cannot affect it, else :data:`NoChange`."""
    sig = _signature(sig)
    nf = normalize(f, sig)
    if not _independence_applies(stmt):
        return NoChange
    if nf.free_vars() & mod_set(stmt, sig):
        return NoChange
    return nf


# ---------------------------------------------------------------------------
# the transformer


class _Engine:
    def __init__(self, sig, strategies=None, params=None, use_independence=True, box=None):
        self.sig = sig
        self.layout = layout_for(sig)
        self.strategies = strategies
        self.params = params or {}
        self.use_independence = use_independence
        self.box = box
        self._memo = {}

    # -- statement cases -------------------------------------------------

    def wp(self, stmt, f: NormalForm) -> NormalForm:
        key = (stmt, f)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = self._wp(stmt, f)
        self._memo[key] = out
        return out

    def _wp(self, stmt, f: NormalForm) -> NormalForm:
        if f.is_zero() and not isinstance(stmt, While):
            return f
        if isinstance(stmt, Skip):
            return f
        if isinstance(stmt, Diverge):
            return NormalForm.zero(self.layout)
        if isinstance(stmt, Seq):
            return self.wp(stmt.first, self.wp(stmt.second, f))
        if self.use_independence and _independence_applies(stmt):
            mods = mod_set(stmt, self.sig)
            keep, rest = {}, {}
            for k, t in f.terms.items():
                (rest if f.term_vars(k) & mods else keep)[k] = t
            if keep:
                inner = self._dispatch(stmt, NormalForm(self.layout, rest))
                return NormalForm(self.layout, keep) + inner
        return self._dispatch(stmt, f)

    def _dispatch(self, stmt, f):
        if f.is_zero():
            return f
        if isinstance(stmt, Assign):
            if self.sig.is_observable(stmt.target):
                return self.assign(f, stmt.target, stmt.expr)
            # ill-typed but harmless: a one-branch sample
            return self.sample(f, stmt.target, SampleSpec(((ONE, stmt.expr),)))
        if isinstance(stmt, Sample):
            return self.sample(f, stmt.target, stmt.spec)
        if isinstance(stmt, Observe):
            return self.observe(f, stmt.target, stmt.source)
        if isinstance(stmt, If):
            a = self.wp(stmt.then, f).with_item(make_prop_fact(stmt.cond, True))
            b = self.wp(stmt.orelse, f).with_item(make_prop_fact(stmt.cond, False))
            return a + b
        if isinstance(stmt, Infer):
            g = self.infer_guard(stmt)
            return self.wp(stmt.then, f).with_item(g) + self.wp(stmt.orelse, f).with_item(g.negate())
        if isinstance(stmt, While):
            return self.loop(stmt, f)
        if isinstance(stmt, (Skip, Seq, Diverge)):
            return self._wp(stmt, f)
        raise TypeError(f"not a statement: {stmt!r}")

    def assign(self, f, x, e):
        def fact_fn(fact):
            if isinstance(fact, PropFact):
                return make_prop_fact(substitute(fact.prop, x, e), fact.polarity)
            sub = lambda k: _subst_env(k, {x: e})
            return make_leaf_fact(leaf_map_keys(fact.lhs, sub), fact.op, fact.coeff, leaf_map_keys(fact.rhs, sub))

        return f.transform(lambda t: table_subst_obs(t, x, e), fact_fn)

    def sample(self, f, x, spec):
        lay = self.layout
        return f.transform(lambda t: table_sample(lay, t, x, spec), lambda fact: fact)

    def observe(self, f, y, x):
        dom = self.sig.domains.get(x)
        if not dom:
            raise DomainRequired(f"observing `{x}` needs a declared finite domain")
        lay = self.layout
        total = NormalForm.zero(lay)
        for c in dom:
            g = self.assign(f, y, Const(c)) if y is not None else f
            total = total + g.transform(lambda t, c=c: table_mask(lay, t, x, c), lambda fact: fact)
        return total

    def infer_guard(self, stmt) -> TGuard:
        th = stmt.threshold
        bound = th.bound
        if th.is_param and bound not in self.sig.params:
            raise NotExpressible(f"infer threshold uses unknown parameter {bound!r}")
        return TGuard(self.layout.table(Iverson(stmt.prop)), th.op, bound, self.layout.all_ones)

    # -- loops ---------------------------------------------------------

    def strategy_for(self, loop):
        s = None
        if self.strategies is not None:
            s = self.strategies.get(loop)
            if s is None:
                s = self.strategies.get(None)
        if s is None:
            raise StrategyMissing("no strategy for loop `while (...)`; give --unroll N or --invariant FILE")
        return s

    def loop(self, loop: While, f: NormalForm) -> NormalForm:
        s = self.strategy_for(loop)
        if isinstance(s, Unroll):
            return self.unroll(loop, f, s.n)
        inv = normalize(s.predicate, self.sig)
        res = check_invariant(loop, f, inv, self.sig, box=self.box, strategies=self.strategies)
        if not isinstance(res, Proved):
            raise UnprovedInvariant(f"invariant not proved: {res.status}" + (
                f" ({res.reason})" if isinstance(res, Unknown) else ""))
        return inv

    def characteristic(self, loop: While, f: NormalForm, x: NormalForm) -> NormalForm:
        exit_part = f.with_item(make_prop_fact(loop.cond, False))
        body_part = self.wp(loop.body, x).with_item(make_prop_fact(loop.cond, True))
        return exit_part + body_part

    def unroll(self, loop, f, n):
        x = NormalForm.zero(self.layout)
        for _ in range(n):
            x = self.characteristic(loop, f, x)
        return x


def _engine(sig, strategies=None, params=None, use_independence=True, box=None):
    sig = _signature(sig)
    return _Engine(sig, _strategy_map(sig, strategies), params, use_independence, box)


def _strategy_map(prog_or_sig, strategies):
    if strategies is None:
        return None
    if isinstance(strategies, (Unroll, Invariant)):
        return {None: strategies}
    return dict(strategies)


def wp_loopfree(stmt, f, sig, use_independence: bool = True) -> NormalForm:
    """Weakest pre-expectation of a loop-free statement."""
    if not is_loop_free(stmt):
        raise StrategyMissing("wp_loopfree needs a loop-free statement; use bound_program for loops")
    eng = _engine(sig, use_independence=use_independence)
    return eng.wp(stmt, normalize(f, eng.sig))


def wp(stmt, f, sig, strategies=None, use_independence: bool = True) -> NormalForm:
    """Weakest pre-expectation with loops handled by ``strategies``."""
    eng = _engine(sig, strategies, use_independence=use_independence)
    return eng.wp(stmt, normalize(f, eng.sig))


@dataclass(frozen=True)
class CharacteristicFunction:
    """``X -> (1 - Pr(guard)) * post + Pr(guard) * wp(body, X)``."""

    guard: object
    body: object
    post: object

    @classmethod
    def of(cls, loop: While, post) -> "CharacteristicFunction":
        return cls(loop.cond, loop.body, post)

    @property
    def loop(self) -> While:
        return While(self.guard, self.body)


def apply_characteristic(phi: CharacteristicFunction, x, sig, strategies=None,
                         use_independence: bool = True) -> NormalForm:
    eng = _engine(sig, strategies, use_independence=use_independence)
    return eng.characteristic(phi.loop, normalize(phi.post, eng.sig), normalize(x, eng.sig))


def wp_unroll(loop: While, f, n: int, sig, strategies=None) -> NormalForm:
    """``Phi_F^n(0)``, the weakest pre-expectation of ``while^n``."""
    if n < 0:
        raise ValueError("unroll depth must be non-negative")
    eng = _engine(sig, strategies)
    return eng.unroll(loop, normalize(f, eng.sig), n)


# ---------------------------------------------------------------------------
# pointwise evaluation


def wp_eval(stmt, f, beta: BeliefState, sig, params: Optional[Mapping] = None, unroll: Optional[int] = None):
    """``wp(stmt, f)(beta)`` computed directly on belief states.

    Loops are replaced by ``while^unroll``.  The rules are applied to concrete
    beliefs instead of predicates, so this stays fast when the symbolic
    normal form grows with the unrolling depth.
    """
    sig = _signature(sig)
    params = params or {}
    f = normalize(f, sig)
    if not is_loop_free(stmt):
        if unroll is None:
            raise StrategyMissing("wp_eval needs an unrolling depth for loops")
        from .syntax import bound_loops

        stmt = bound_loops(stmt, unroll)
    memo = {}

    def ev(stmts: tuple, b: BeliefState):
        key = (stmts, b)
        if key in memo:
            return memo[key]
        out = _ev(stmts, b)
        memo[key] = out
        return out

    def _ev(stmts, b):
        if not stmts:
            return f.evaluate(b, params)
        head, rest = stmts[0], stmts[1:]
        if isinstance(head, Skip):
            return ev(rest, b)
        if isinstance(head, Diverge):
            return ZERO
        if isinstance(head, Seq):
            return ev((head.first, head.second) + rest, b)
        if isinstance(head, Assign):
            return ev(rest, assign_update(b, head.target, head.expr))
        if isinstance(head, Sample):
            return ev(rest, sample_update(b, head.target, head.spec, sig.domains.get(head.target)))
        if isinstance(head, Observe):
            total = ZERO
            pos = b.names.index(head.source)
            seen = sorted({v[pos] for v, _ in b.entries})
            for c in seen:
                p = prob(b, _eq(head.source, c))
                nb = observe_update(b, head.target, head.source, c) if head.target else None
                if nb is None:
                    from .belief import condition

                    nb = condition(b, head.source, c)
                total += p * ev(rest, nb)
            return total
        if isinstance(head, If):
            values = b.entries[0][0]
            branch = head.then if compile_prop(head.cond, b.names)(values) else head.orelse
            return ev((branch,) + rest, b)
        if isinstance(head, Infer):
            bound = resolve_threshold(head.threshold, params)
            ok = compare(head.threshold.op, prob(b, head.prop), bound)
            return ev(((head.then if ok else head.orelse),) + rest, b)
        raise TypeError(f"unexpected statement {head!r}")

    return ev((stmt,), beta)


def _eq(name, c):
    from .syntax import Compare, Var

    return Compare("=", Var(name), Const(c))


# ---------------------------------------------------------------------------
# invariant checking


def default_box(sig) -> dict:
    return {p: (ZERO, ONE) for p in _signature(sig).params}


def _canonical_literal(item):
    """``(atom, polarity)`` with the atom's operator in {'=', '<', '<='}."""
    if isinstance(item, PropFact):
        return item.prop, item.polarity
    if item.op in ("!=", ">=", ">"):
        neg = NEGATED_COMPARE[item.op]
        return type(item)(item.lhs, neg, item.coeff, item.rhs), False
    return item, True


def _literal_holds(item, assignment) -> bool:
    atom, pol = _canonical_literal(item)
    return assignment[atom] == pol


def _leaf_nonneg(leaf, box) -> bool:
    groups = {}
    for (key, mono), v in leaf:
        groups.setdefault(key, {})
        groups[key][mono] = groups[key].get(mono, ZERO) + v
    return all(Poly(g).nonneg_on_box(box) for g in groups.values())


def _table_nonneg(table, box) -> bool:
    return all(_leaf_nonneg(leaf, box) for leaf in set(table))


def _resolve_keys(table, truth):
    """Replace ``[P]`` keys whose truth is fixed by the current case."""
    if not truth:
        return table

    def fn(key):
        if isinstance(key, Iverson):
            lit = make_prop_fact(key.prop, True)
            if isinstance(lit, bool):
                return Const(int(lit))
            if lit.prop in truth:
                return Const(int(truth[lit.prop] == lit.polarity))
        return key

    return tuple(leaf_map_keys(leaf, fn) if leaf else leaf for leaf in table)


def _proportional(table, a):
    """A leaf ``c`` with ``table[r] = c * a[r]`` for every row, if one exists."""
    c = None
    for t, ar in zip(table, a):
        aq = leaf_q(ar)
        if aq is None:
            return None
        if aq == 0:
            if t:
                return None
            continue
        cand = leaf_scale(t, 1 / aq)
        if c is None:
            c = cand
        elif cand != c:
            return None
    return c


def _leaf_nonpos(leaf, box) -> bool:
    return _leaf_nonneg(leaf_scale(leaf, -1), box)


def _replacements(table, constraints, box):
    """Tables that lower-bound ``table`` given the true guard constraints."""
    out = [table]
    for a, op, theta, b in constraints:
        c = _proportional(table, a)
        if c is None or not c:
            continue
        if any(leaf_q(r) is None and not all(k == ONE_KEY for (k, _), _v in r) for r in b):
            continue
        upper = op in ("<", "<=", "=")
        lower = op in (">", ">=", "=")
        ok = (upper and _leaf_nonpos(c, box)) or (lower and _leaf_nonneg(c, box))
        if not ok:
            continue
        th = Poly.of(theta)
        rep = tuple(leaf_mul_poly(leaf_mul_poly(c, leaf_poly(r)), th) if r else EMPTY for r in b)
        out.append(rep)
    return out


def _dominated(tables, constraints, box, limit=4096) -> bool:
    options = [_replacements(t, constraints, box) for t in tables]
    count = 1
    for o in options:
        count *= len(o)
    if count > limit:
        options = [o[:1] if len(o) == 1 else [o[-1]] for o in options]
    for choice in itertools.product(*options):
        total = choice[0] if choice else None
        for t in choice[1:]:
            total = table_add(total, t)
        if total is None or _table_nonneg(total, box):
            return True
    return False


def _prove_nonneg(d: NormalForm, box, cap: int) -> Optional[str]:
    """None when ``d >= 0`` is established, else the reason it was not."""
    atoms = []
    for facts, _ in d.terms:
        for f in facts:
            a, _pol = _canonical_literal(f)
            if a not in atoms:
                atoms.append(a)
    if len(atoms) > cap:
        return f"{len(atoms)} observable case splits exceed the cap of {cap}"
    for values in itertools.product((True, False), repeat=len(atoms)):
        truth = dict(zip(atoms, values))
        prop_truth = {a: v for a, v in truth.items() if not isinstance(a, LeafFact)}
        active = []
        for (facts, guards), t in d.terms.items():
            if all(_literal_holds(f, truth) for f in facts):
                active.append((guards, _resolve_keys(t, prop_truth)))
        if not active:
            continue
        gatoms = []
        for guards, _ in active:
            for g in guards:
                a, _pol = _canonical_literal(g)
                if a not in gatoms:
                    gatoms.append(a)
        if len(gatoms) > cap:
            return f"{len(gatoms)} belief guards exceed the cap of {cap}"
        for gvalues in itertools.product((True, False), repeat=len(gatoms)):
            gtruth = dict(zip(gatoms, gvalues))
            tables = [t for guards, t in active if all(_literal_holds(g, gtruth) for g in guards)]
            if not tables:
                continue
            constraints = []
            for a, v in gtruth.items():
                op = a.op if v else NEGATED_COMPARE[a.op]
                constraints.append((a.lhs, op, a.coeff, a.rhs))
            if not _dominated(tables, constraints, box):
                return "term-wise domination failed"
    return None


def _param_grid(names, box, steps=10):
    grids = []
    for n in names:
        lo, hi = box.get(n, (ZERO, ONE))
        lo, hi = Q(lo), Q(hi)
        grids.append(sorted({lo + (hi - lo) * Q(k, steps) for k in range(steps + 1)}))
    return [dict(zip(names, combo)) for combo in itertools.product(*grids)]


def _point_masses(sig, rng, count):
    out = []
    rows = list(sig.rows) or [()]
    upos = {n: i for i, n in enumerate(sig.unobservables)}
    for _ in range(count):
        row = rng.choice(rows)
        values = []
        for n in sig.names:
            if n in upos:
                values.append(row[upos[n]])
            else:
                dom = sig.domains[n]
                values.append(rng.choice(dom) if dom else rng.randint(0, 2))
        out.append(BeliefState.point(Assignment(sig.names, values)))
    return out


def falsify(lhs: NormalForm, rhs: NormalForm, sig, box=None, seed: int = 0, samples: int = 400):
    """Search for ``beta, params`` with ``lhs(beta) > rhs(beta)``."""
    sig = _signature(sig)
    box = default_box(sig) if box is None else box
    rng = random.Random(seed)
    names = sorted(sig.params)
    grid = _param_grid(names, box) if names else [{}]
    beliefs = _point_masses(sig, rng, samples // 4)
    beliefs += [random_belief(sig, rng) for _ in range(samples - len(beliefs))]
    for beta in beliefs:
        for params in rng.sample(grid, min(len(grid), 6)) if len(grid) > 6 else grid:
            lv, rv = lhs.evaluate(beta, params), rhs.evaluate(beta, params)
            if lv > rv:
                return Falsified(beta, params, lv, rv)
    return None


def check_invariant(loop: While, f, inv, sig, box=None, cap: int = 8, seed: int = 0,
                    samples: int = 400, strategies=None) -> CheckResult:
    """Try to establish ``Phi_F(I) <= I`` for every belief and parameter in ``box``."""
    sig = _signature(sig)
    box = default_box(sig) if box is None else dict(box)
    eng = _engine(sig, strategies, box=box)
    fn = normalize(f, sig)
    inv = normalize(inv, sig)
    delta = eng.characteristic(loop, fn, inv)
    reason = _prove_nonneg(inv - delta, box, cap)
    if reason is None:
        return Proved()
    witness = falsify(delta, inv, sig, box, seed, samples)
    if witness is not None:
        return witness
    return Unknown(reason)


# ---------------------------------------------------------------------------
# whole programs


def bound_program(prog: Program, f, strategies=None, params=None, box=None) -> Bound:
    """Push ``f`` back through ``prog``; loops use their strategies.

    ``strategies`` maps a loop (its pre-order index or the ``While`` node) to
    :class:`Unroll` or :class:`Invariant`; the key ``None`` is a default for
    every loop.  The result is tagged ``LowerBound`` (unrolling),
    ``UpperBound`` (invariants) or ``Exact`` (no loops).
    """
    sig = prog.signature
    loops = loops_of(prog.body)
    smap = {}
    if isinstance(strategies, (Unroll, Invariant)):
        smap[None] = strategies
    elif strategies:
        for k, s in strategies.items():
            if isinstance(k, int):
                if not 0 <= k < len(loops):
                    raise StrategyMissing(f"no loop with index {k}")
                smap[loops[k]] = s
            else:
                smap[k] = s
    for loop in loops:
        if loop not in smap and None not in smap:
            raise StrategyMissing(f"loop {loops.index(loop)} has no strategy")
    used = {type(smap.get(l, smap.get(None))) for l in loops}
    if Unroll in used and Invariant in used:
        raise MixedStrategies("lower and upper bound strategies cannot be mixed in one query")
    eng = _Engine(sig, smap, params, True, box if box is not None else default_box(sig))
    result = eng.wp(prog.body, normalize(f, sig))
    tag = EXACT if not loops else (LOWER if Unroll in used else UPPER)
    return Bound(result, tag)
