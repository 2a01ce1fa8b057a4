"""Variable assignments, belief states and the three belief-state operators.

A :class:`BeliefState` is an exact finite distribution over assignments of
natural numbers to a fixed tuple of variable names.  Entries are kept sorted
by their value tuple, so two belief states are equal exactly when they denote
the same distribution.
"""

from __future__ import annotations

import random
from functools import lru_cache
from typing import Iterable, Mapping, Optional

from ._rational import ONE, ZERO, Q, as_q, q_short, q_str
from .errors import DomainError, ZeroProbabilityObservation
from .syntax import (
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
)


@lru_cache(maxsize=None)
def _index_for(names: tuple) -> dict:
    return {n: i for i, n in enumerate(names)}


class Assignment:
    """Total map from variable names to naturals (``sigma``)."""

    __slots__ = ("names", "values", "_hash")

    def __init__(self, names, values):
        self.names = tuple(names)
        self.values = tuple(int(v) for v in values)
        if len(self.names) != len(self.values):
            raise ValueError("names and values differ in length")
        self._hash = None

    @classmethod
    def from_dict(cls, mapping: Mapping, names: Optional[Iterable] = None) -> "Assignment":
        names = tuple(names) if names is not None else tuple(mapping)
        missing = [n for n in names if n not in mapping]
        if missing:
            raise ValueError(f"assignment misses variables {missing}")
        extra = [n for n in mapping if n not in names]
        if extra:
            raise ValueError(f"unknown variables {extra}")
        return cls(names, (mapping[n] for n in names))

    def __getitem__(self, name: str) -> int:
        return self.values[_index_for(self.names)[name]]

    def set(self, name: str, value: int) -> "Assignment":
        i = _index_for(self.names)[name]
        vals = list(self.values)
        vals[i] = int(value)
        return Assignment(self.names, vals)

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))

    def __eq__(self, other):
        return isinstance(other, Assignment) and self.values == other.values and self.names == other.names

    def __lt__(self, other):
        return self.values < other.values

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.names, self.values))
        return self._hash

    def __repr__(self):
        inner = ",".join(f"{n}={v}" for n, v in zip(self.names, self.values))
        return f"{{{inner}}}"


class BeliefState:
    """Finite rational distribution over assignments (``beta``)."""

    __slots__ = ("names", "entries", "_hash")

    def __init__(self, names, entries):
        # entries: tuple of (values tuple, positive Q) sorted by values
        self.names = names
        self.entries = entries
        self._hash = None

    @classmethod
    def from_pairs(cls, names, pairs, check: bool = True) -> "BeliefState":
        """Merge ``(assignment-or-values, probability)`` pairs into a belief state."""
        names = tuple(names)
        acc = {}
        for key, p in pairs:
            values = key.values if isinstance(key, Assignment) else tuple(int(v) for v in key)
            if isinstance(key, Assignment) and key.names != names:
                raise ValueError("assignment over different variables")
            if len(values) != len(names):
                raise ValueError("assignment length does not match the variables")
            acc[values] = acc.get(values, ZERO) + Q(p)
        return cls._build(names, acc, check)

    @classmethod
    def _build(cls, names, acc: dict, check: bool = True) -> "BeliefState":
        items = []
        for values, p in acc.items():
            if p < 0:
                raise ValueError("negative probability")
            if p != 0:
                items.append((values, p))
        items.sort(key=lambda kv: kv[0])
        if check and sum(p for _, p in items) != 1:
            raise ValueError("probabilities must sum to exactly 1")
        return cls(names, tuple(items))

    @classmethod
    def point(cls, assignment: Assignment) -> "BeliefState":
        return cls(assignment.names, ((assignment.values, ONE),))

    def support(self) -> list:
        return [Assignment(self.names, v) for v, _ in self.entries]

    def items(self):
        """``(Assignment, probability)`` pairs in canonical order."""
        return [(Assignment(self.names, v), p) for v, p in self.entries]

    def __call__(self, assignment) -> "Q":
        values = assignment.values if isinstance(assignment, Assignment) else tuple(assignment)
        for v, p in self.entries:
            if v == values:
                return p
        return ZERO

    def total(self):
        return sum((p for _, p in self.entries), ZERO)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return (
            isinstance(other, BeliefState)
            and self.names == other.names
            and self.entries == other.entries
        )

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def sort_key(self):
        return tuple((v, (int(p.numerator), int(p.denominator))) for v, p in self.entries)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.names, self.entries))
        return self._hash

    def __repr__(self):
        parts = []
        for v, p in self.entries:
            inner = ",".join(f"{n}={x}" for n, x in zip(self.names, v))
            parts.append(f"{q_short(p)}|{inner}>")
        return " + ".join(parts) if parts else "0"

    def to_json(self) -> list:
        return [
            {"assignment": dict(zip(self.names, v)), "prob": q_str(p)}
            for v, p in self.entries
        ]

    @classmethod
    def from_json(cls, data, names: Optional[Iterable] = None) -> "BeliefState":
        if not data:
            raise ValueError("belief state needs at least one entry")
        names = tuple(names) if names is not None else tuple(data[0]["assignment"])
        pairs = []
        for entry in data:
            a = Assignment.from_dict(entry["assignment"], names)
            pairs.append((a, as_q(entry["prob"])))
        return cls.from_pairs(names, pairs)


# ---------------------------------------------------------------------------
# evaluation


def _arith(op):
    if op == "+":
        return lambda a, b: a + b
    if op == "-":
        return lambda a, b: a - b if a > b else 0
    if op == "*":
        return lambda a, b: a * b
    return lambda a, b: a // b if b else 0


_CMP = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


@lru_cache(maxsize=65536)
def compile_expr(e, names: tuple):
    """Compile an expression into a function of the value tuple."""
    if isinstance(e, Var):
        try:
            i = _index_for(names)[e.name]
        except KeyError:
            raise KeyError(f"undeclared variable {e.name!r}") from None
        return lambda v: v[i]
    if isinstance(e, Const):
        c = e.value
        return lambda v: c
    if isinstance(e, BinOp):
        f, g, op = compile_expr(e.left, names), compile_expr(e.right, names), _arith(e.op)
        return lambda v: op(f(v), g(v))
    if isinstance(e, Iverson):
        p = compile_prop(e.prop, names)
        return lambda v: 1 if p(v) else 0
    if isinstance(e, WeightedSum):
        parts = [(w, compile_expr(sub, names)) for w, sub in e.items]
        return lambda v: sum((w * f(v) for w, f in parts), ZERO)
    raise TypeError(f"not an expression: {e!r}")


@lru_cache(maxsize=65536)
def compile_prop(p, names: tuple):
    """Compile a proposition into a 0/1-valued function of the value tuple."""
    if isinstance(p, Compare):
        f, g, op = compile_expr(p.left, names), compile_expr(p.right, names), _CMP[p.op]
        return lambda v: op(f(v), g(v))
    if isinstance(p, And):
        f, g = compile_prop(p.left, names), compile_prop(p.right, names)
        return lambda v: f(v) and g(v)
    if isinstance(p, Or):
        f, g = compile_prop(p.left, names), compile_prop(p.right, names)
        return lambda v: f(v) or g(v)
    if isinstance(p, Not):
        f = compile_prop(p.operand, names)
        return lambda v: not f(v)
    if isinstance(p, BoolConst):
        b = bool(p.value)
        return lambda v: b
    raise TypeError(f"not a proposition: {p!r}")


def eval_expr(sigma: Assignment, e) -> int:
    return compile_expr(e, sigma.names)(sigma.values)


def eval_prop(sigma: Assignment, p) -> int:
    return 1 if compile_prop(p, sigma.names)(sigma.values) else 0


def prob(beta: BeliefState, p) -> "Q":
    """``[[beta]](P)``: total mass of the assignments satisfying ``P``."""
    f = compile_prop(p, beta.names)
    return sum((q for v, q in beta.entries if f(v)), ZERO)


def expect(beta: BeliefState, e) -> "Q":
    """Expected value of an (extended) expression under ``beta``."""
    f = compile_expr(e, beta.names)
    return sum((q * f(v) for v, q in beta.entries), ZERO)


# ---------------------------------------------------------------------------
# updates


@lru_cache(maxsize=65536)
def assign_update(beta: BeliefState, x: str, e) -> BeliefState:
    """Image of ``beta`` under ``sigma -> sigma[x -> sigma(E)]``."""
    i = _index_for(beta.names)[x]
    f = compile_expr(e, beta.names)
    acc = {}
    for v, p in beta.entries:
        nv = v[:i] + (f(v),) + v[i + 1:]
        acc[nv] = acc.get(nv, ZERO) + p
    return BeliefState._build(beta.names, acc, check=False)


def _check_domain(x, c, domain):
    if domain is not None and c not in domain:
        raise DomainError(f"sampled value {c} is outside the domain of {x}")


@lru_cache(maxsize=65536)
def sample_update(beta: BeliefState, x: str, spec, domain: Optional[tuple] = None) -> BeliefState:
    """``beta[x -> f]`` for a finite weighted spec ``f``."""
    i = _index_for(beta.names)[x]
    branches = [(w, compile_expr(e, beta.names)) for w, e in spec.branches]
    acc = {}
    for v, p in beta.entries:
        for w, f in branches:
            c = f(v)
            _check_domain(x, c, domain)
            nv = v[:i] + (c,) + v[i + 1:]
            acc[nv] = acc.get(nv, ZERO) + p * w
    return BeliefState._build(beta.names, acc, check=False)


def sample_distribution(spec, sigma_values: tuple, names: tuple) -> list:
    """``f(sigma)`` as sorted ``(value, probability)`` pairs with merged duplicates."""
    acc = {}
    for w, e in spec.branches:
        c = compile_expr(e, names)(sigma_values)
        acc[c] = acc.get(c, ZERO) + w
    return sorted((c, p) for c, p in acc.items() if p != 0)


@lru_cache(maxsize=65536)
def condition(beta: BeliefState, x: str, c: int) -> BeliefState:
    """``beta|_{x=c}``: drop assignments with ``x != c`` and renormalize."""
    i = _index_for(beta.names)[x]
    kept = [(v, p) for v, p in beta.entries if v[i] == c]
    mass = sum((p for _, p in kept), ZERO)
    if mass == 0:
        raise ZeroProbabilityObservation(f"observing {x}={c} has probability zero")
    if mass == 1:
        return beta if len(kept) == len(beta.entries) else BeliefState(beta.names, tuple(kept))
    return BeliefState(beta.names, tuple((v, p / mass) for v, p in kept))


def observe_update(beta: BeliefState, y: str, x: str, c: int) -> BeliefState:
    """``beta|_{x=c}[y -> c]``."""
    return assign_update(condition(beta, x, c), y, Const(c))


def marginal(beta: BeliefState, x: str) -> list:
    """Distribution of ``x`` under ``beta`` as sorted ``(value, probability)`` pairs."""
    i = _index_for(beta.names)[x]
    acc = {}
    for v, p in beta.entries:
        acc[v[i]] = acc.get(v[i], ZERO) + p
    return sorted(acc.items())


def is_consistent(beta: BeliefState, observables: Iterable[str]) -> bool:
    """True iff all support assignments agree on every observable variable."""
    idx = _index_for(beta.names)
    cols = [idx[o] for o in observables if o in idx]
    if not beta.entries:
        return True
    first = beta.entries[0][0]
    return all(v[i] == first[i] for v, _ in beta.entries for i in cols)


# ---------------------------------------------------------------------------
# construction helpers


def initial_belief(sig) -> BeliefState:
    """Point distribution at the minimum of every domain (0 for undomained observables)."""
    values = [min(sig.domains[n]) if sig.domains[n] else 0 for n in sig.names]
    return BeliefState.point(Assignment(sig.names, values))


def random_belief(sig, rng: random.Random, max_support: int = 4, obs_values=None,
                  max_obs_value: int = 3, denominators=(2, 3, 4, 5, 6, 8, 10)) -> BeliefState:
    """Random consistent belief state over ``sig``.

    Observable variables take one common value (``obs_values`` if given);
    unobservable variables vary over their declared domains.
    """
    if obs_values is None:
        obs_values = {}
        for n in sig.observables:
            dom = sig.domains[n]
            obs_values[n] = rng.choice(dom) if dom else rng.randint(0, max_obs_value)
    rows = list(sig.rows) or [()]
    k = rng.randint(1, min(max_support, len(rows)))
    chosen = rng.sample(rows, k)
    den = rng.choice(denominators)
    weights = [rng.randint(1, den) for _ in chosen]
    total = sum(weights)
    upos = {n: i for i, n in enumerate(sig.unobservables)}
    pairs = []
    for row, w in zip(chosen, weights):
        values = [row[upos[n]] if n in upos else obs_values[n] for n in sig.names]
        pairs.append((tuple(values), Q(w) / total))
    return BeliefState.from_pairs(sig.names, pairs)
