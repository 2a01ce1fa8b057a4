"""Tokenizer and recursive-descent parser for ``.pbl`` programs.

The concrete syntax mirrors the usual listings::

    param q;
    uvar d in {0, 1};
    uvar t in {0, 1};
    ovar inCare;

    d = sample(0.9|1> + 0.1|0>);
    inCare = true;
    while (inCare) {
        infer (p(d = 1) > q) {
            d = sample(0.75|d> + 0.25|0>);
            observe t;
        } else {
            inCare = false;
        }
    }

Comments run from ``//`` or ``#`` to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from ._rational import Q
from .errors import ParseError
from .syntax import (
    COMPARE_OPS,
    FALSE,
    OBSERVABLE,
    TRUE,
    UNOBSERVABLE,
    Assign,
    BinOp,
    Compare,
    Const,
    Diverge,
    If,
    Infer,
    Iverson,
    Not,
    And,
    Or,
    Observe,
    Program,
    Sample,
    SampleSpec,
    Skip,
    Threshold,
    Var,
    VarDecl,
    WeightedSum,
    While,
    seq,
)

KEYWORDS = {
    "param", "uvar", "ovar", "in", "skip", "if", "else", "while", "infer",
    "sample", "observe", "true", "false", "diverge",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>(?://|\#)[^\n]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|&&|\|\||\.\.|[-+*/()<>=!{};,\[\]|:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "ident", "kw", "op", "eof"
    text: str
    line: int
    column: int


def tokenize(text: str) -> list:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and value in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class TokenParser:
    """Shared machinery for the program parser and the predicate parser."""

    #: allow ``mix(...)`` weighted sums inside expressions
    extended = False

    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token helpers -------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("op", "kw") and t.text in texts

    def error(self, message: str, expected=(), tok: Token = None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column, expected)

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"unexpected {_describe(self.tok)}", [text])
        return self.advance()

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def ident(self) -> str:
        if self.tok.kind != "ident":
            raise self.error(f"unexpected {_describe(self.tok)}", ["identifier"])
        return self.advance().text

    def natural(self) -> int:
        t = self.tok
        if t.kind != "num" or "." in t.text:
            raise self.error(f"unexpected {_describe(t)}", ["natural number"])
        self.advance()
        return int(t.text)

    def rational(self):
        """``3``, ``0.9`` or ``3/4`` as an exact rational."""
        t = self.tok
        if t.kind != "num":
            raise self.error(f"unexpected {_describe(t)}", ["number"])
        self.advance()
        value = Fraction(t.text)
        if self.at("/") and self.peek().kind == "num":
            self.advance()
            d = self.tok
            den = Fraction(self.advance().text)
            if den == 0:
                raise self.error("division by zero in a rational literal", tok=d)
            value = value / den
        return Q(value)

    # -- expressions ---------------------------------------------------

    def expr(self):
        left = self.term()
        while self.at("+", "-"):
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.factor()
        while self.at("*", "/"):
            op = self.advance().text
            left = BinOp(op, left, self.factor())
        return left

    def factor(self):
        t = self.tok
        if t.kind == "num":
            return Const(self.natural())
        if t.kind == "ident":
            if self.extended and t.text == "mix" and self.peek().text == "(":
                return self.mix()
            self.advance()
            return Var(t.text)
        if self.at("true", "false"):
            self.advance()
            return Const(1 if t.text == "true" else 0)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("["):
            p = self.prop()
            self.expect("]")
            return Iverson(p)
        raise self.error(f"unexpected {_describe(t)}", ["expression"])

    def mix(self):
        self.advance()
        self.expect("(")
        items = [self.weighted_branch()]
        while self.accept("+"):
            items.append(self.weighted_branch())
        self.expect(")")
        return WeightedSum(tuple(items))

    def weighted_branch(self):
        w = self.rational()
        self.expect("|")
        e = self.expr()
        self.expect(">")
        return (w, e)

    # -- propositions --------------------------------------------------

    def prop(self):
        left = self.conj()
        while self.accept("||"):
            left = Or(left, self.conj())
        return left

    def conj(self):
        left = self.neg()
        while self.accept("&&"):
            left = And(left, self.neg())
        return left

    def neg(self):
        if self.accept("!"):
            return Not(self.neg())
        return self.atom()

    def atom(self):
        if self.at("("):
            start = self.pos
            try:
                self.advance()
                p = self.prop()
                self.expect(")")
                if not self._at_expr_continuation():
                    return p
            except ParseError:
                pass
            self.pos = start
        literal = self.tok if self.at("true", "false") else None
        left = self.expr()
        if self.tok.kind == "op" and (self.tok.text in COMPARE_OPS or self.tok.text == "=="):
            op = self.advance().text
            op = "=" if op == "==" else op
            return Compare(op, left, self.expr())
        if literal is not None and isinstance(left, Const):
            return TRUE if literal.text == "true" else FALSE
        return Compare("!=", left, Const(0))

    def _at_expr_continuation(self) -> bool:
        t = self.tok
        return t.kind == "op" and (t.text in COMPARE_OPS or t.text in ("==", "+", "-", "*", "/"))


class ProgramParser(TokenParser):
    def __init__(self, text: str, allow_diverge: bool = False):
        super().__init__(text)
        self.allow_diverge = allow_diverge

    def program(self) -> Program:
        params, decls = [], []
        seen = set()
        while self.at("param", "uvar", "ovar"):
            kw = self.advance().text
            while True:
                name_tok = self.tok
                name = self.ident()
                if name in seen:
                    raise self.error(f"duplicate declaration of {name!r}", tok=name_tok)
                seen.add(name)
                if kw == "param":
                    params.append(name)
                else:
                    domain = self.domain() if self.accept("in") else None
                    if kw == "uvar" and domain is None:
                        raise self.error(
                            f"unobservable variable {name!r} needs a finite domain", ["in"]
                        )
                    decls.append(VarDecl(name, UNOBSERVABLE if kw == "uvar" else OBSERVABLE, domain))
                if not self.accept(","):
                    break
            self.expect(";")
        body = self.statements(top=True)
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {_describe(self.tok)}", ["statement", "end of input"])
        return Program(tuple(params), tuple(decls), body)

    def domain(self) -> tuple:
        self.expect("{")
        first = self.natural()
        if self.accept(".."):
            last = self.natural()
            if last < first:
                raise self.error("empty domain range")
            values = list(range(first, last + 1))
        else:
            values = [first]
            while self.accept(","):
                values.append(self.natural())
        self.expect("}")
        return tuple(sorted(set(values)))

    _STATEMENT_START = ["identifier", "skip", "if", "while", "infer", "observe", "}"]

    def statements(self, top: bool = False):
        stmts = []
        while True:
            if top and self.tok.kind == "eof":
                break
            if not top and self.at("}"):
                break
            stmts.append(self.statement())
        return seq(*stmts)

    def block(self):
        self.expect("{")
        body = self.statements()
        self.expect("}")
        return body

    def statement(self):
        t = self.tok
        if self.accept("skip"):
            self.expect(";")
            return Skip()
        if self.at("diverge"):
            if not self.allow_diverge:
                raise self.error("'diverge' is reserved for generated loop unrollings")
            self.advance()
            self.expect(";")
            return Diverge()
        if self.accept("observe"):
            source = self.ident()
            self.expect(";")
            return Observe(None, source)
        if self.accept("if"):
            self.expect("(")
            cond = self.prop()
            self.expect(")")
            then = self.block()
            orelse = Skip()
            if self.accept("else"):
                orelse = self.statement() if self.at("if") else self.block()
            return If(cond, then, orelse)
        if self.accept("while"):
            self.expect("(")
            cond = self.prop()
            self.expect(")")
            return While(cond, self.block())
        if self.accept("infer"):
            self.expect("(")
            if not (self.tok.kind == "ident" and self.tok.text == "p"):
                raise self.error(f"unexpected {_describe(self.tok)}", ["p"])
            self.advance()
            self.expect("(")
            prop = self.prop()
            self.expect(")")
            threshold = self.threshold()
            self.expect(")")
            then = self.block()
            orelse = self.block() if self.accept("else") else Skip()
            return Infer(prop, threshold, then, orelse)
        if t.kind == "ident":
            target = self.ident()
            self.expect("=")
            if self.accept("sample"):
                self.expect("(")
                spec = self.sample_spec()
                self.expect(")")
                self.expect(";")
                return Sample(target, spec)
            if self.accept("observe"):
                source = self.ident()
                self.expect(";")
                return Observe(target, source)
            e = self.expr()
            self.expect(";")
            return Assign(target, e)
        raise self.error(f"unexpected {_describe(t)}", self._STATEMENT_START)

    def threshold(self) -> Threshold:
        t = self.tok
        if not (t.kind == "op" and (t.text in COMPARE_OPS or t.text == "==")):
            raise self.error(f"unexpected {_describe(t)}", list(COMPARE_OPS))
        op = self.advance().text
        op = "=" if op == "==" else op
        if self.tok.kind == "ident":
            return Threshold(op, self.ident())
        bound_tok = self.tok
        bound = self.rational()
        if bound > 1:
            raise self.error("probability threshold must lie in [0, 1]", tok=bound_tok)
        return Threshold(op, bound)

    def sample_spec(self) -> SampleSpec:
        start = self.tok
        branches = [self.weighted_branch()]
        while self.accept("+"):
            branches.append(self.weighted_branch())
        for w, _ in branches:
            if w <= 0:
                raise self.error("sample weights must be positive", tok=start)
        if sum(w for w, _ in branches) != 1:
            raise self.error("sample weights must sum to 1", tok=start)
        return SampleSpec(tuple(branches))


def parse(text: str, allow_diverge: bool = False) -> Program:
    """Parse a complete ``.pbl`` program."""
    return ProgramParser(text, allow_diverge=allow_diverge).program()


def parse_statement(text: str, allow_diverge: bool = True):
    """Parse a statement sequence without declarations (used by tests and tools)."""
    p = ProgramParser(text, allow_diverge=allow_diverge)
    body = p.statements(top=True)
    return body


def parse_expr(text: str):
    p = TokenParser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {_describe(p.tok)}", ["end of input"])
    return e


def parse_prop(text: str):
    p = TokenParser(text)
    e = p.prop()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {_describe(p.tok)}", ["end of input"])
    return e
