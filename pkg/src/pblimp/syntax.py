"""Abstract syntax of belief programs, expressions and propositions.

All nodes are immutable and hashable.  The same expression type is shared by
program expressions and the extended expressions used inside predicates; the
latter additionally use :class:`Iverson` and :class:`WeightedSum`, which the
program parser never produces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional, Union

from ._rational import q_short

ARITH_OPS = ("+", "-", "*", "/")
COMPARE_OPS = ("<", "<=", "=", "!=", ">=", ">")

NEGATED_COMPARE = {"<": ">=", "<=": ">", "=": "!=", "!=": "=", ">=": "<", ">": "<="}

OBSERVABLE = "observable"
UNOBSERVABLE = "unobservable"


def _node(cls):
    """Frozen dataclass whose structural hash is computed once."""
    cls = dataclass(frozen=True)(cls)
    generated = cls.__hash__

    def __hash__(self):
        try:
            return self.__dict__["_hash"]
        except KeyError:
            h = generated(self)
            object.__setattr__(self, "_hash", h)
            return h

    cls.__hash__ = __hash__
    return cls


# ---------------------------------------------------------------------------
# expressions


@_node
class Var:
    name: str


@_node
class Const:
    value: int


@_node
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@_node
class Iverson:
    """``[P]``: 1 if the proposition holds, else 0 (predicates only)."""

    prop: "Prop"


@_node
class WeightedSum:
    """Rational-weighted sum of expressions, produced by sample rewriting."""

    items: tuple  # tuple[tuple[Q, Expr], ...]


Expr = Union[Var, Const, BinOp, Iverson, WeightedSum]

# ---------------------------------------------------------------------------
# propositions


@_node
class Compare:
    op: str
    left: Expr
    right: Expr


@_node
class And:
    left: "Prop"
    right: "Prop"


@_node
class Or:
    left: "Prop"
    right: "Prop"


@_node
class Not:
    operand: "Prop"


@_node
class BoolConst:
    value: int


Prop = Union[Compare, And, Or, Not, BoolConst]

TRUE = BoolConst(1)
FALSE = BoolConst(0)

# ---------------------------------------------------------------------------
# statements


@_node
class SampleSpec:
    """Finite distribution ``p1|E1> + p2|E2> + ...`` over values."""

    branches: tuple  # tuple[tuple[Q, Expr], ...]


@_node
class Threshold:
    op: str
    bound: object  # Q or parameter name

    @property
    def is_param(self) -> bool:
        return isinstance(self.bound, str)


@_node
class Skip:
    pass


@_node
class Assign:
    target: str
    expr: Expr


@_node
class Seq:
    first: "Statement"
    second: "Statement"


@_node
class If:
    cond: Prop
    then: "Statement"
    orelse: "Statement"


@_node
class While:
    cond: Prop
    body: "Statement"


@_node
class Sample:
    target: str
    spec: SampleSpec


@_node
class Observe:
    """``target = observe source``; ``target`` is None for the bare sugar form."""

    target: Optional[str]
    source: str


@_node
class Infer:
    prop: Prop
    threshold: Threshold
    then: "Statement"
    orelse: "Statement"


@_node
class Diverge:
    pass


Statement = Union[Skip, Assign, Seq, If, While, Sample, Observe, Infer, Diverge]


class _Terminated:
    """The terminal continuation of a configuration."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TERMINATED"

    def __reduce__(self):
        return (_Terminated, ())


TERMINATED = _Terminated()


def seq(*stmts: Statement) -> Statement:
    """Right-nested sequence of the flattened statements; ``seq()`` is ``Skip()``."""
    stmts = [x for s in stmts for x in flatten_seq(s)]
    if not stmts:
        return Skip()
    result = stmts[-1]
    for s in reversed(stmts[:-1]):
        result = Seq(s, result)
    return result


def flatten_seq(stmt: Statement) -> list:
    out = []
    while isinstance(stmt, Seq):
        out.extend(flatten_seq(stmt.first))
        stmt = stmt.second
    out.append(stmt)
    return out


# ---------------------------------------------------------------------------
# programs and signatures


@_node
class VarDecl:
    name: str
    kind: str
    domain: Optional[tuple] = None


@_node
class Program:
    params: tuple
    decls: tuple
    body: Statement

    @cached_property
    def signature(self) -> "Signature":
        return Signature(self.params, self.decls)

    def with_body(self, body: Statement) -> "Program":
        return Program(self.params, self.decls, body)


class Signature:
    """Variable layout of a program: kinds, domains and the unobservable rows.

    Rows enumerate every combination of unobservable values in declaration
    order; they index the tables used by the symbolic predicate engine.
    """

    def __init__(self, params, decls):
        self.params = tuple(params)
        self.decls = tuple(decls)
        self.names = tuple(d.name for d in decls)
        self.kinds = {d.name: d.kind for d in decls}
        self.domains = {d.name: d.domain for d in decls}
        self.observables = tuple(d.name for d in decls if d.kind == OBSERVABLE)
        self.unobservables = tuple(d.name for d in decls if d.kind == UNOBSERVABLE)
        self.index = {n: i for i, n in enumerate(self.names)}
        for name in self.unobservables:
            if not self.domains[name]:
                raise ValueError(f"unobservable variable {name!r} needs a finite domain")
        self._pos = {
            name: {v: i for i, v in enumerate(self.domains[name])} for name in self.unobservables
        }
        sizes = [len(self.domains[n]) for n in self.unobservables]
        self._strides = []
        stride = 1
        for size in reversed(sizes):
            self._strides.append(stride)
            stride *= size
        self._strides.reverse()
        self.row_count = stride

    def __eq__(self, other):
        return isinstance(other, Signature) and (self.params, self.decls) == (other.params, other.decls)

    def __hash__(self):
        return hash((self.params, self.decls))

    def __repr__(self):
        return f"Signature(params={self.params!r}, names={self.names!r})"

    @cached_property
    def rows(self) -> tuple:
        return tuple(itertools.product(*(self.domains[n] for n in self.unobservables)))

    def row_of(self, values) -> int:
        """Row index for a tuple of unobservable values (in declaration order)."""
        idx = 0
        for name, stride, v in zip(self.unobservables, self._strides, values):
            try:
                idx += self._pos[name][v] * stride
            except KeyError:
                raise KeyError(f"value {v} outside the domain of {name}") from None
        return idx

    def is_observable(self, name: str) -> bool:
        return self.kinds.get(name) == OBSERVABLE

    def is_unobservable(self, name: str) -> bool:
        return self.kinds.get(name) == UNOBSERVABLE


# ---------------------------------------------------------------------------
# traversal helpers


def expr_vars(e) -> frozenset:
    """Free variables of an expression or proposition."""
    out = set()
    _collect_vars(e, out)
    return frozenset(out)


def _collect_vars(e, out):
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, (BinOp, Compare, And, Or)):
        _collect_vars(e.left, out)
        _collect_vars(e.right, out)
    elif isinstance(e, Iverson):
        _collect_vars(e.prop, out)
    elif isinstance(e, Not):
        _collect_vars(e.operand, out)
    elif isinstance(e, WeightedSum):
        for _, sub in e.items:
            _collect_vars(sub, out)


def substitute(e, name: str, replacement: Expr):
    """Replace every occurrence of variable ``name`` by ``replacement``."""
    if isinstance(e, Var):
        return replacement if e.name == name else e
    if isinstance(e, (Const, BoolConst)):
        return e
    if isinstance(e, BinOp):
        left = substitute(e.left, name, replacement)
        right = substitute(e.right, name, replacement)
        if left is e.left and right is e.right:
            return e
        return BinOp(e.op, left, right)
    if isinstance(e, Compare):
        left = substitute(e.left, name, replacement)
        right = substitute(e.right, name, replacement)
        if left is e.left and right is e.right:
            return e
        return Compare(e.op, left, right)
    if isinstance(e, (And, Or)):
        left = substitute(e.left, name, replacement)
        right = substitute(e.right, name, replacement)
        if left is e.left and right is e.right:
            return e
        return type(e)(left, right)
    if isinstance(e, Not):
        inner = substitute(e.operand, name, replacement)
        return e if inner is e.operand else Not(inner)
    if isinstance(e, Iverson):
        inner = substitute(e.prop, name, replacement)
        return e if inner is e.prop else Iverson(inner)
    if isinstance(e, WeightedSum):
        return WeightedSum(tuple((w, substitute(s, name, replacement)) for w, s in e.items))
    raise TypeError(f"not an expression: {e!r}")


def iter_statements(stmt: Statement) -> Iterator[Statement]:
    """Pre-order traversal of a statement tree."""
    stack = [stmt]
    while stack:
        s = stack.pop()
        yield s
        if isinstance(s, Seq):
            stack.append(s.second)
            stack.append(s.first)
        elif isinstance(s, (If, Infer)):
            stack.append(s.orelse)
            stack.append(s.then)
        elif isinstance(s, While):
            stack.append(s.body)


def loops_of(stmt: Statement) -> list:
    """While loops in pre-order; the position is the loop's index."""
    return [s for s in iter_statements(stmt) if isinstance(s, While)]


def is_loop_free(stmt: Statement) -> bool:
    return not any(isinstance(s, While) for s in iter_statements(stmt))


def contains_diverge(stmt: Statement) -> bool:
    return any(isinstance(s, Diverge) for s in iter_statements(stmt))


def bounded_while(loop: While, n: int, inner: Optional[int] = None) -> Statement:
    """``while^n``: ``diverge`` for n = 0, else one guarded unrolling step.

    Loops nested in the body are bounded by ``inner`` (default ``n``) every
    time they are entered.
    """
    if n < 0:
        raise ValueError("loop bound must be non-negative")
    body = bound_loops(loop.body, n if inner is None else inner)
    result: Statement = Diverge()
    for _ in range(n):
        result = If(loop.cond, Seq(body, result), Skip())
    return result


def bound_loops(stmt: Statement, n: int) -> Statement:
    """Replace every loop by its ``n``-bounded unrolling."""
    if isinstance(stmt, While):
        return bounded_while(stmt, n)
    if isinstance(stmt, Seq):
        return Seq(bound_loops(stmt.first, n), bound_loops(stmt.second, n))
    if isinstance(stmt, If):
        return If(stmt.cond, bound_loops(stmt.then, n), bound_loops(stmt.orelse, n))
    if isinstance(stmt, Infer):
        return Infer(stmt.prop, stmt.threshold, bound_loops(stmt.then, n), bound_loops(stmt.orelse, n))
    return stmt


# ---------------------------------------------------------------------------
# simplification of expressions and propositions


def _arith(op: str, a, b):
    if op == "+":
        return a + b
    if op == "-":
        d = a - b
        return d if d > 0 else 0
    if op == "*":
        return a * b
    if b == 0:
        return 0
    return a // b


def compare(op: str, a, b) -> bool:
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == ">=":
        return a >= b
    if op == ">":
        return a > b
    raise ValueError(f"unknown comparison {op!r}")


def simplify(e):
    """Constant folding plus the identities that hold over the naturals."""
    if isinstance(e, (Var, Const, BoolConst)):
        return e
    if isinstance(e, BinOp):
        left, right = simplify(e.left), simplify(e.right)
        lc = left.value if isinstance(left, Const) else None
        rc = right.value if isinstance(right, Const) else None
        if lc is not None and rc is not None:
            return Const(_arith(e.op, lc, rc))
        op = e.op
        if op == "+":
            if lc == 0:
                return right
            if rc == 0:
                return left
        elif op == "-":
            if rc == 0:
                return left
            if lc == 0:
                return Const(0)
            if left == right:
                return Const(0)
        elif op == "*":
            if lc == 0 or rc == 0:
                return Const(0)
            if lc == 1:
                return right
            if rc == 1:
                return left
        elif op == "/":
            if lc == 0 or rc == 0:
                return Const(0)
            if rc == 1:
                return left
        if left is e.left and right is e.right:
            return e
        return BinOp(op, left, right)
    if isinstance(e, Iverson):
        p = simplify(e.prop)
        if isinstance(p, BoolConst):
            return Const(p.value)
        return e if p is e.prop else Iverson(p)
    if isinstance(e, WeightedSum):
        items = []
        for w, sub in e.items:
            sub = simplify(sub)
            if w != 0 and not (isinstance(sub, Const) and sub.value == 0):
                items.append((w, sub))
        if not items:
            return Const(0)
        if len(items) == 1 and items[0][0] == 1:
            return items[0][1]
        return WeightedSum(tuple(items))
    if isinstance(e, Compare):
        left, right = simplify(e.left), simplify(e.right)
        if isinstance(left, Const) and isinstance(right, Const):
            return BoolConst(int(compare(e.op, left.value, right.value)))
        if left == right and not _has_weighted(left):
            return BoolConst(int(e.op in ("<=", "=", ">=")))
        if left is e.left and right is e.right:
            return e
        return Compare(e.op, left, right)
    if isinstance(e, And):
        left, right = simplify(e.left), simplify(e.right)
        if left == FALSE or right == FALSE:
            return FALSE
        if left == TRUE:
            return right
        if right == TRUE:
            return left
        return And(left, right)
    if isinstance(e, Or):
        left, right = simplify(e.left), simplify(e.right)
        if left == TRUE or right == TRUE:
            return TRUE
        if left == FALSE:
            return right
        if right == FALSE:
            return left
        return Or(left, right)
    if isinstance(e, Not):
        inner = simplify(e.operand)
        if isinstance(inner, BoolConst):
            return BoolConst(1 - inner.value)
        if isinstance(inner, Not):
            return inner.operand
        return Not(inner)
    raise TypeError(f"cannot simplify {e!r}")


def _has_weighted(e) -> bool:
    if isinstance(e, WeightedSum):
        return True
    if isinstance(e, BinOp):
        return _has_weighted(e.left) or _has_weighted(e.right)
    return False


# ---------------------------------------------------------------------------
# pretty printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_expr(e) -> str:
    return _fmt_expr(e, 0)


def _fmt_expr(e, ctx: int) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Iverson):
        return f"[{format_prop(e.prop)}]"
    if isinstance(e, WeightedSum):
        inner = " + ".join(f"{q_short(w)}|{_fmt_expr(s, 0)}>" for w, s in e.items)
        return f"mix({inner})"
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        text = f"{_fmt_expr(e.left, prec)} {e.op} {_fmt_expr(e.right, prec + 1)}"
        return f"({text})" if prec < ctx else text
    raise TypeError(f"not an expression: {e!r}")


def format_prop(p) -> str:
    return _fmt_prop(p, 0)


def _fmt_prop(p, ctx: int) -> str:
    # precedence: or = 1, and = 2, not/atoms = 3
    if isinstance(p, BoolConst):
        return "true" if p.value else "false"
    if isinstance(p, Compare):
        return f"{format_expr(p.left)} {p.op} {format_expr(p.right)}"
    if isinstance(p, Not):
        return f"!({_fmt_prop(p.operand, 0)})"
    if isinstance(p, And):
        text = f"{_fmt_prop(p.left, 2)} && {_fmt_prop(p.right, 3)}"
        return f"({text})" if ctx > 2 else text
    if isinstance(p, Or):
        text = f"{_fmt_prop(p.left, 1)} || {_fmt_prop(p.right, 2)}"
        return f"({text})" if ctx > 1 else text
    raise TypeError(f"not a proposition: {p!r}")


def format_threshold(t: Threshold) -> str:
    bound = t.bound if t.is_param else q_short(t.bound)
    return f"{t.op} {bound}"


def format_spec(spec: SampleSpec) -> str:
    return " + ".join(f"{q_short(w)}|{format_expr(e)}>" for w, e in spec.branches)


def format_statement(stmt: Statement, indent: int = 0) -> str:
    return "\n".join(_fmt_stmt_lines(stmt, indent))


def _block(stmt: Statement, indent: int) -> list:
    return _fmt_stmt_lines(stmt, indent + 1)


def _fmt_stmt_lines(stmt: Statement, indent: int) -> list:
    pad = "    " * indent
    if isinstance(stmt, Seq):
        lines = []
        for s in flatten_seq(stmt):
            lines.extend(_fmt_stmt_lines(s, indent))
        return lines
    if isinstance(stmt, Skip):
        return [pad + "skip;"]
    if isinstance(stmt, Diverge):
        return [pad + "diverge;"]
    if isinstance(stmt, Assign):
        return [f"{pad}{stmt.target} = {format_expr(stmt.expr)};"]
    if isinstance(stmt, Sample):
        return [f"{pad}{stmt.target} = sample({format_spec(stmt.spec)});"]
    if isinstance(stmt, Observe):
        if stmt.target is None:
            return [f"{pad}observe {stmt.source};"]
        return [f"{pad}{stmt.target} = observe {stmt.source};"]
    if isinstance(stmt, If):
        return (
            [f"{pad}if ({format_prop(stmt.cond)}) {{"]
            + _block(stmt.then, indent)
            + [f"{pad}}} else {{"]
            + _block(stmt.orelse, indent)
            + [pad + "}"]
        )
    if isinstance(stmt, While):
        return [f"{pad}while ({format_prop(stmt.cond)}) {{"] + _block(stmt.body, indent) + [pad + "}"]
    if isinstance(stmt, Infer):
        head = f"{pad}infer (p({format_prop(stmt.prop)}) {format_threshold(stmt.threshold)}) {{"
        return head.split("\n") + _block(stmt.then, indent) + [f"{pad}}} else {{"] + _block(stmt.orelse, indent) + [pad + "}"]
    raise TypeError(f"not a statement: {stmt!r}")


def format_decl(d: VarDecl) -> str:
    kw = "ovar" if d.kind == OBSERVABLE else "uvar"
    if d.domain is None:
        return f"{kw} {d.name};"
    return f"{kw} {d.name} in {{{', '.join(str(v) for v in d.domain)}}};"


def format_program(prog: Program) -> str:
    lines = [f"param {p};" for p in prog.params]
    lines += [format_decl(d) for d in prog.decls]
    lines.append("")
    lines.append(format_statement(prog.body))
    return "\n".join(lines) + "\n"
