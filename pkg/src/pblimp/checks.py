"""Static checks (declarations, observability discipline) and desugaring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import TypeCheckError
from .syntax import (
    OBSERVABLE,
    Assign,
    If,
    Infer,
    Observe,
    Program,
    Sample,
    Seq,
    VarDecl,
    While,
    expr_vars,
    format_expr,
    format_prop,
    format_spec,
    iter_statements,
)


@dataclass(frozen=True)
class Diagnostic:
    """One violation; ``variable`` names the offending variable when there is one."""

    statement: str
    message: str
    variable: Optional[str] = None

    def __str__(self):
        return f"{self.statement}: {self.message}"

    def to_json(self) -> dict:
        return {"statement": self.statement, "message": self.message, "variable": self.variable}


def _head(stmt) -> str:
    if isinstance(stmt, Assign):
        return f"{stmt.target} = {format_expr(stmt.expr)}"
    if isinstance(stmt, Sample):
        return f"{stmt.target} = sample({format_spec(stmt.spec)})"
    if isinstance(stmt, Observe):
        return f"{stmt.target} = observe {stmt.source}" if stmt.target else f"observe {stmt.source}"
    if isinstance(stmt, If):
        return f"if ({format_prop(stmt.cond)})"
    if isinstance(stmt, While):
        return f"while ({format_prop(stmt.cond)})"
    if isinstance(stmt, Infer):
        return f"infer (p({format_prop(stmt.prop)}) ...)"
    return type(stmt).__name__.lower()


def check_observability(prog: Program) -> list:
    """Return the list of diagnostics; an empty list means the program is well typed."""
    sig = prog.signature
    out = []

    def leak(stmt, kind, e):
        for name in sorted(expr_vars(e)):
            if name not in sig.kinds:
                out.append(Diagnostic(_head(stmt), f"undeclared variable `{name}`", name))
            elif sig.is_unobservable(name):
                out.append(Diagnostic(_head(stmt), f"{kind} uses unobservable `{name}`", name))

    def declared(stmt, e):
        for name in sorted(expr_vars(e)):
            if name not in sig.kinds:
                out.append(Diagnostic(_head(stmt), f"undeclared variable `{name}`", name))

    def target(stmt, name, want):
        if name not in sig.kinds:
            out.append(Diagnostic(_head(stmt), f"undeclared variable `{name}`", name))
        elif sig.kinds[name] != want:
            out.append(Diagnostic(_head(stmt), f"`{name}` must be {want}", name))

    for stmt in iter_statements(prog.body):
        if isinstance(stmt, Assign):
            target(stmt, stmt.target, OBSERVABLE)
            leak(stmt, "assignment source", stmt.expr)
        elif isinstance(stmt, (If, While)):
            guard = "if-guard" if isinstance(stmt, If) else "while-guard"
            leak(stmt, guard, stmt.cond)
        elif isinstance(stmt, Sample):
            target(stmt, stmt.target, "unobservable")
            for _, e in stmt.spec.branches:
                declared(stmt, e)
        elif isinstance(stmt, Observe):
            target(stmt, stmt.source, "unobservable")
            if stmt.target is not None:
                target(stmt, stmt.target, OBSERVABLE)
        elif isinstance(stmt, Infer):
            declared(stmt, stmt.prop)
            if stmt.threshold.is_param and stmt.threshold.bound not in prog.params:
                out.append(
                    Diagnostic(_head(stmt), f"undeclared parameter `{stmt.threshold.bound}`", stmt.threshold.bound)
                )
    return out


def typecheck(prog: Program) -> Program:
    """Raise :class:`TypeCheckError` unless the program is well typed."""
    diags = check_observability(prog)
    if diags:
        raise TypeCheckError(diags)
    return prog


def desugar(prog: Program) -> Program:
    """Give every bare ``observe x`` a fresh observable target ``_obsN``."""
    taken = set(prog.params) | {d.name for d in prog.decls}
    fresh = []
    counter = [0]

    def new_name():
        while f"_obs{counter[0]}" in taken:
            counter[0] += 1
        name = f"_obs{counter[0]}"
        taken.add(name)
        fresh.append(name)
        return name

    def walk(stmt):
        if isinstance(stmt, Observe) and stmt.target is None:
            return Observe(new_name(), stmt.source)
        if isinstance(stmt, Seq):
            return Seq(walk(stmt.first), walk(stmt.second))
        if isinstance(stmt, If):
            return If(stmt.cond, walk(stmt.then), walk(stmt.orelse))
        if isinstance(stmt, While):
            return While(stmt.cond, walk(stmt.body))
        if isinstance(stmt, Infer):
            return Infer(stmt.prop, stmt.threshold, walk(stmt.then), walk(stmt.orelse))
        return stmt

    body = walk(prog.body)
    if not fresh:
        return prog
    decls = prog.decls + tuple(VarDecl(n, OBSERVABLE, None) for n in fresh)
    return Program(prog.params, decls, body)


def load_program(text: str) -> Program:
    """Parse, type-check and desugar."""
    from .parser import parse

    return desugar(typecheck(parse(text)))

