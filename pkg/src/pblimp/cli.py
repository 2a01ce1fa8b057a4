"""Command-line interface: ``pblimp check|run|wp|invariant|simulate|difftest``.

Every command prints one JSON report on stdout.  Failures are signalled by
the exit status: 1 for parse/type errors, 2 for strategy or parameter
problems, 3 when ``difftest`` finds a property violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from ._rational import as_q, q_str
from .belief import BeliefState, compile_prop, initial_belief
from .checks import check_observability, desugar
from .errors import (
    DomainError,
    DomainRequired,
    NotExpressible,
    ParameterError,
    ParseError,
    StrategyError,
    TypeCheckError,
    ZeroProbabilityObservation,
)
from .operational import exec_alt, exec_from_belief, simulate_many
from .parser import parse, parse_prop
from .predicates import parse_predicate
from .syntax import loops_of

EXIT_INPUT = 1
EXIT_STRATEGY = 2
EXIT_VIOLATION = 3


class ExitError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class QueryConfig:
    """One command-line query; subcommand-specific options live in ``extra``."""

    command: str
    program: Optional[str] = None
    params: dict = field(default_factory=dict)
    fuel: Optional[int] = None
    seed: int = 0
    samples: int = 400
    output: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def get(self, name, default=None):
        return self.extra.get(name, default)


# ---------------------------------------------------------------------------
# argument handling


def _binding(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    name, value = text.split("=", 1)
    try:
        return name.strip(), as_q(value.strip())
    except (ValueError, ZeroDivisionError, TypeError):
        raise argparse.ArgumentTypeError(f"not a rational: {value!r}") from None


def _interval(text: str):
    """``q=0..1/2`` parameter assumption."""
    if "=" not in text or ".." not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=LO..HI, got {text!r}")
    name, rng = text.split("=", 1)
    lo, hi = rng.split("..", 1)
    try:
        return name.strip(), (as_q(lo.strip()), as_q(hi.strip()))
    except (ValueError, ZeroDivisionError, TypeError):
        raise argparse.ArgumentTypeError(f"not a rational interval: {rng!r}") from None


def _default_seed() -> int:
    raw = os.environ.get("PBLIMP_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ExitError(EXIT_STRATEGY, f"PBLIMP_SEED must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pblimp", description="Belief programs: semantics, wp and invariants.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, program=True):
        if program:
            p.add_argument("program", help="program file (.pbl)")
        p.add_argument("--param", action="append", type=_binding, default=[], metavar="NAME=VALUE")
        p.add_argument("--seed", type=int, default=None, help="random seed (default: $PBLIMP_SEED or 0)")
        p.add_argument("--output", "-o", help="also write the report to this file")

    def init(p):
        p.add_argument("--init", help="initial belief as JSON text or a JSON file path")

    p = sub.add_parser("check", help="parse and type-check a program")
    common(p)

    p = sub.add_parser("run", help="exact distribution over final beliefs")
    common(p)
    init(p)
    p.add_argument("--fuel", type=int, help="bound every loop by while^n")

    p = sub.add_parser("wp", help="weakest pre-expectation bound for a program")
    common(p)
    init(p)
    p.add_argument("--post", required=True, help="postexpectation, e.g. 'Pr(d = 1)'")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--unroll", type=int, help="lower bound from n unrollings of every loop")
    g.add_argument("--invariant", help="file holding a loop invariant (upper bound)")
    p.add_argument("--pointwise", action="store_true",
                   help="with --unroll: evaluate at the initial belief without building the predicate")
    p.add_argument("--assume", action="append", type=_interval, default=[], metavar="NAME=LO..HI")

    p = sub.add_parser("invariant", help="check a loop invariant")
    common(p)
    p.add_argument("--post", required=True, help="postexpectation of the loop")
    p.add_argument("--invariant", required=True, help="file holding the candidate invariant")
    p.add_argument("--loop", type=int, default=0, help="pre-order index of the loop (default 0)")
    p.add_argument("--samples", type=int, default=400, help="falsifier sample count")
    p.add_argument("--assume", action="append", type=_interval, default=[], metavar="NAME=LO..HI")

    p = sub.add_parser("simulate", help="seeded Monte-Carlo runs")
    common(p)
    init(p)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--event", help="proposition over the final true state to count, e.g. 'd = 1'")

    p = sub.add_parser("difftest", help="differential tests over a random program corpus")
    common(p, program=False)
    p.add_argument("--count", type=int, default=200)
    return ap


# ---------------------------------------------------------------------------
# helpers


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ExitError(EXIT_INPUT, f"cannot read {path}: {exc.strerror}") from None


def _load(path: str, allow_diverge: bool = False):
    prog = parse(_read(path), allow_diverge=allow_diverge)
    diags = check_observability(prog)
    if diags:
        raise TypeCheckError(diags)
    return desugar(prog)


def _params(prog, bindings) -> dict:
    params = {}
    for name, value in bindings.items():
        if name not in prog.params:
            raise ParameterError(f"unknown parameter {name!r}")
        params[name] = value
    return params


def _initial(prog, text: Optional[str]) -> BeliefState:
    sig = prog.signature
    if text is None:
        return initial_belief(sig)
    raw = text
    if not text.lstrip().startswith(("[", "{")):
        raw = _read(text)
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ExitError(EXIT_INPUT, f"--init is not valid JSON: {exc}") from None
    if isinstance(data, dict):
        data = [{"assignment": data, "prob": "1"}]
    try:
        full = []
        for entry in data:
            a = {n: 0 for n in sig.names}
            for n, v in entry["assignment"].items():
                if n not in a:
                    raise ValueError(f"unknown variable {n!r}")
                a[n] = v
            for n in sig.names:
                dom = sig.domains[n]
                if dom and a[n] not in dom:
                    if n in entry["assignment"]:
                        raise ValueError(f"{n} = {a[n]} is outside its domain")
                    a[n] = dom[0]
            full.append({"assignment": a, "prob": entry["prob"]})
        return BeliefState.from_json(full, sig.names)
    except (KeyError, TypeError, ValueError) as exc:
        raise ExitError(EXIT_INPUT, f"bad initial belief: {exc}") from None


def _box(prog, assumptions):
    from .wp import default_box

    box = default_box(prog.signature)
    for name, (lo, hi) in assumptions:
        if name not in prog.params:
            raise ParameterError(f"unknown parameter {name!r}")
        if lo > hi:
            raise ParameterError(f"empty interval for {name!r}")
        box[name] = (lo, hi)
    return box


def _value(f, beta, params, prog):
    missing = set(prog.params) - set(params)
    if f.params() & missing:
        return None
    return q_str(f.evaluate(beta, params))


# ---------------------------------------------------------------------------
# commands


def cmd_check(cfg):
    prog = parse(_read(cfg.program))
    diags = check_observability(prog)
    report = {
        "command": "check",
        "program": cfg.program,
        "ok": not diags,
        "diagnostics": [d.to_json() for d in diags],
    }
    return report, (EXIT_INPUT if diags else 0)


def cmd_run(cfg):
    prog = _load(cfg.program)
    params = _params(prog, cfg.params)
    if loops_of(prog.body) and cfg.fuel is None:
        raise ExitError(EXIT_STRATEGY, "the program has loops; give --fuel N")
    beta0 = _initial(prog, cfg.get("init"))
    sig = prog.signature
    joint = exec_from_belief(prog.body, beta0, cfg.fuel, params, sig)
    alt = exec_alt(prog.body, beta0, cfg.fuel, params, sig)
    marg = joint.marginal()
    report = {
        "command": "run",
        "program": cfg.program,
        "fuel": cfg.fuel,
        "params": {k: q_str(v) for k, v in sorted(params.items())},
        "initial": beta0.to_json(),
        "distribution": alt.to_json(),
        "joint": joint.to_json(),
        "residual": q_str(alt.residual),
        "agreement": marg.entries == alt.entries and marg.residual == alt.residual,
    }
    return report, 0


def cmd_wp(cfg):
    from .wp import Invariant, Unroll, bound_program, wp_eval

    prog = _load(cfg.program)
    params = _params(prog, cfg.params)
    sig = prog.signature
    post = parse_predicate(cfg.get("post"), sig)
    beta0 = _initial(prog, cfg.get("init"))
    report = {"command": "wp", "program": cfg.program, "post": cfg.get("post")}
    if cfg.get("pointwise"):
        if cfg.fuel is None:
            raise ExitError(EXIT_STRATEGY, "--pointwise needs --unroll N")
        value = wp_eval(prog.body, post, beta0, sig, params, unroll=cfg.fuel)
        report.update({"tag": "LowerBound" if loops_of(prog.body) else "Exact", "predicate": None,
                       "belief": beta0.to_json(), "value": q_str(value)})
        return report, 0
    if cfg.fuel is not None:
        strategies = Unroll(cfg.fuel)
    elif cfg.get("invariant") is not None:
        strategies = Invariant(parse_predicate(_read(cfg.get("invariant")).strip(), sig))
    else:
        strategies = None
    bound = bound_program(prog, post, strategies, params, box=_box(prog, cfg.get("assume", [])))
    report.update({
        "tag": bound.tag,
        "predicate": str(bound.predicate),
        "belief": beta0.to_json(),
        "params": {k: q_str(v) for k, v in sorted(params.items())},
        "value": _value(bound.predicate, beta0, params, prog),
    })
    return report, 0


def cmd_invariant(cfg):
    from .wp import check_invariant

    prog = _load(cfg.program)
    sig = prog.signature
    loops = loops_of(prog.body)
    index = cfg.get("loop", 0)
    if not 0 <= index < len(loops):
        raise ExitError(EXIT_STRATEGY, f"no loop with index {index}")
    post = parse_predicate(cfg.get("post"), sig)
    inv = parse_predicate(_read(cfg.get("invariant")).strip(), sig)
    res = check_invariant(loops[index], post, inv, sig, box=_box(prog, cfg.get("assume", [])),
                          seed=cfg.seed, samples=cfg.samples)
    report = {"command": "invariant", "program": cfg.program, "loop": index, "result": res.to_json()}
    return report, 0


def cmd_simulate(cfg):
    prog = _load(cfg.program)
    params = _params(prog, cfg.params)
    sig = prog.signature
    beta0 = _initial(prog, cfg.get("init"))
    event_text = cfg.get("event")
    event = parse_prop(event_text) if event_text else None
    runs = simulate_many(prog.body, beta0, cfg.seed, cfg.get("runs", 1000), cfg.get("max_steps", 1000), params, sig)
    terminated = [r for r in runs if r.terminated]
    truths = {n: Counter() for n in sig.names}
    for r in terminated:
        for n, v in r.truth.as_dict().items():
            truths[n][v] += 1
    report = {
        "command": "simulate",
        "program": cfg.program,
        "seed": cfg.seed,
        "runs": len(runs),
        "terminated": len(terminated),
        "truncated": len(runs) - len(terminated),
        "mean_steps": sum(r.steps for r in runs) / len(runs) if runs else 0,
        "truth_counts": {n: {str(k): c for k, c in sorted(cnt.items())} for n, cnt in truths.items()},
    }
    if event is not None:
        hits = sum(1 for r in terminated if compile_prop(event, r.truth.names)(r.truth.values))
        report["event"] = event_text
        report["event_count"] = hits
        report["event_frequency"] = hits / len(runs) if runs else 0.0
    return report, 0


def cmd_difftest(cfg):
    from .corpus import difftest

    reports = difftest(cfg.seed, cfg.get("count", 200))
    ok = all(r.ok for r in reports)
    report = {
        "command": "difftest",
        "seed": cfg.seed,
        "count": cfg.get("count", 200),
        "ok": ok,
        "properties": [r.to_json() for r in reports],
    }
    return report, (0 if ok else EXIT_VIOLATION)


COMMANDS = {
    "check": cmd_check,
    "run": cmd_run,
    "wp": cmd_wp,
    "invariant": cmd_invariant,
    "simulate": cmd_simulate,
    "difftest": cmd_difftest,
}


def config_from_args(args) -> QueryConfig:
    """Turn parsed arguments into a :class:`QueryConfig`."""
    opts = dict(vars(args))
    seed = opts.pop("seed", None)
    fuel, unroll = opts.pop("fuel", None), opts.pop("unroll", None)
    cfg = QueryConfig(
        command=opts.pop("command"),
        program=opts.pop("program", None),
        params=dict(opts.pop("param", [])),
        fuel=fuel if fuel is not None else unroll,
        seed=seed if seed is not None else _default_seed(),
        samples=opts.pop("samples", 400),
        output=opts.pop("output", None),
    )
    cfg.extra = {k: v for k, v in opts.items() if v is not None}
    return cfg


def dispatch(cfg: QueryConfig) -> tuple:
    """Run one query; returns ``(report, exit status)`` or raises ExitError."""
    try:
        return COMMANDS[cfg.command](cfg)
    except ParseError as exc:
        raise ExitError(EXIT_INPUT, f"parse error: {exc}") from None
    except TypeCheckError as exc:
        raise ExitError(EXIT_INPUT, str(exc)) from None
    except (StrategyError, ParameterError, NotExpressible, DomainRequired) as exc:
        raise ExitError(EXIT_STRATEGY, f"{type(exc).__name__}: {exc}") from None
    except (DomainError, ZeroProbabilityObservation) as exc:
        raise ExitError(EXIT_STRATEGY, f"{type(exc).__name__}: {exc}") from None


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = config_from_args(args)
        report, status = dispatch(cfg)
    except ExitError as exc:
        print(f"pblimp: {exc.message}", file=sys.stderr)
        return exc.status
    text = json.dumps(report, indent=2)
    print(text)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
