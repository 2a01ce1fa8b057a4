"""Small-step execution under both operational semantics.

``step`` follows the semantics with a true assignment: sampling branches,
observing is deterministic.  ``step_alt`` follows the belief-only semantics:
sampling is deterministic, observing branches.  ``explore`` and ``exec_alt``
build the computation trees exhaustively and aggregate terminal leaves.

Loops are executed under a fuel bound ``n``: every loop occurrence is
replaced by its bounded unrolling ``while^n`` (``n`` guard checks, then
``diverge``), so the truncated exploration is exactly the bounded-loop
semantics.  Mass that reaches ``diverge`` is reported as residual.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping, Optional

from ._rational import ONE, ZERO, Q, q_str
from .belief import (
    Assignment,
    BeliefState,
    assign_update,
    compile_expr,
    condition,
    eval_expr,
    marginal,
    observe_update,
    prob,
    sample_distribution,
    sample_update,
)
from .errors import DomainError, ParameterError, SemanticsViolation
from .syntax import (
    TERMINATED,
    Assign,
    Compare,
    Const,
    Diverge,
    If,
    Infer,
    Observe,
    Sample,
    Seq,
    Skip,
    Var,
    While,
    bound_loops,
    compare,
    is_loop_free,
)


@dataclass(frozen=True)
class Configuration:
    continuation: object  # Statement or TERMINATED
    belief: BeliefState
    truth: Assignment
    pathprob: object = ONE


@dataclass(frozen=True)
class AltConfiguration:
    continuation: object
    belief: BeliefState
    pathprob: object = ONE


def resolve_threshold(threshold, params: Optional[Mapping]):
    if not threshold.is_param:
        return threshold.bound
    if not params or threshold.bound not in params:
        raise ParameterError(f"parameter {threshold.bound!r} is not bound")
    return Q(params[threshold.bound])


def _domain(sig, name):
    return sig.domains.get(name) if sig is not None else None


def _observable_branch(belief: BeliefState, cond) -> bool:
    v = prob(belief, cond)
    if v == 1:
        return True
    if v == 0:
        return False
    raise SemanticsViolation(f"observable guard has probability {v} in an inconsistent belief state")


def _infer_branch(belief, stmt, params) -> bool:
    return compare(stmt.threshold.op, prob(belief, stmt.prop), resolve_threshold(stmt.threshold, params))


def _eq(name, value):
    return Compare("=", Var(name), Const(value))


def _unroll(stmt: While):
    return If(stmt.cond, Seq(stmt.body, stmt), Skip())


def step(cfg: Configuration, params: Optional[Mapping] = None, sig=None) -> list:
    """Successor configurations of ``cfg`` (sampled values ascending)."""
    c, beta, sigma, p = cfg.continuation, cfg.belief, cfg.truth, cfg.pathprob
    if c is TERMINATED:
        raise ValueError("terminated configurations have no successors")
    if isinstance(c, Skip):
        return [Configuration(TERMINATED, beta, sigma, p)]
    if isinstance(c, Assign):
        value = eval_expr(sigma, c.expr)
        dom = _domain(sig, c.target)
        if dom is not None and value not in dom:
            raise DomainError(f"assigned value {value} is outside the domain of {c.target}")
        return [Configuration(TERMINATED, assign_update(beta, c.target, c.expr), sigma.set(c.target, value), p)]
    if isinstance(c, Sample):
        dom = _domain(sig, c.target)
        new_beta = sample_update(beta, c.target, c.spec, dom)
        out = []
        for value, q in sample_distribution(c.spec, sigma.values, sigma.names):
            if dom is not None and value not in dom:
                raise DomainError(f"sampled value {value} is outside the domain of {c.target}")
            out.append(Configuration(TERMINATED, new_beta, sigma.set(c.target, value), p * q))
        return out
    if isinstance(c, Observe):
        value = sigma[c.source]
        if prob(beta, _eq(c.source, value)) == 0:
            raise SemanticsViolation("the observed true value is impossible in the belief state")
        if c.target is None:
            return [Configuration(TERMINATED, condition(beta, c.source, value), sigma, p)]
        return [
            Configuration(TERMINATED, observe_update(beta, c.target, c.source, value), sigma.set(c.target, value), p)
        ]
    if isinstance(c, If):
        branch = c.then if _observable_branch(beta, c.cond) else c.orelse
        return [Configuration(branch, beta, sigma, p)]
    if isinstance(c, While):
        return [Configuration(_unroll(c), beta, sigma, p)]
    if isinstance(c, Infer):
        branch = c.then if _infer_branch(beta, c, params) else c.orelse
        return [Configuration(branch, beta, sigma, p)]
    if isinstance(c, Seq):
        out = []
        for s in step(Configuration(c.first, beta, sigma, ONE), params, sig):
            nxt = c.second if s.continuation is TERMINATED else Seq(s.continuation, c.second)
            out.append(Configuration(nxt, s.belief, s.truth, p * s.pathprob))
        return out
    if isinstance(c, Diverge):
        return [Configuration(c, beta, sigma, p)]
    raise TypeError(f"not a statement: {c!r}")


def step_alt(cfg: AltConfiguration, params: Optional[Mapping] = None, sig=None) -> list:
    """Successors under the belief-only semantics (observed values ascending)."""
    c, beta, p = cfg.continuation, cfg.belief, cfg.pathprob
    if c is TERMINATED:
        raise ValueError("terminated configurations have no successors")
    if isinstance(c, Skip):
        return [AltConfiguration(TERMINATED, beta, p)]
    if isinstance(c, Assign):
        dom = _domain(sig, c.target)
        if dom is not None:
            f = compile_expr(c.expr, beta.names)
            for v, _ in beta.entries:
                if f(v) not in dom:
                    raise DomainError(f"assigned value {f(v)} is outside the domain of {c.target}")
        return [AltConfiguration(TERMINATED, assign_update(beta, c.target, c.expr), p)]
    if isinstance(c, Sample):
        return [AltConfiguration(TERMINATED, sample_update(beta, c.target, c.spec, _domain(sig, c.target)), p)]
    if isinstance(c, Observe):
        out = []
        for value, q in marginal(beta, c.source):
            if c.target is None:
                nb = condition(beta, c.source, value)
            else:
                nb = observe_update(beta, c.target, c.source, value)
            out.append(AltConfiguration(TERMINATED, nb, p * q))
        return out
    if isinstance(c, If):
        branch = c.then if _observable_branch(beta, c.cond) else c.orelse
        return [AltConfiguration(branch, beta, p)]
    if isinstance(c, While):
        return [AltConfiguration(_unroll(c), beta, p)]
    if isinstance(c, Infer):
        branch = c.then if _infer_branch(beta, c, params) else c.orelse
        return [AltConfiguration(branch, beta, p)]
    if isinstance(c, Seq):
        out = []
        for s in step_alt(AltConfiguration(c.first, beta, ONE), params, sig):
            nxt = c.second if s.continuation is TERMINATED else Seq(s.continuation, c.second)
            out.append(AltConfiguration(nxt, s.belief, p * s.pathprob))
        return out
    if isinstance(c, Diverge):
        return [AltConfiguration(c, beta, p)]
    raise TypeError(f"not a statement: {c!r}")


def _head(stmt):
    while isinstance(stmt, Seq):
        stmt = stmt.first
    return stmt


class TerminalDistribution:
    """Sub-distribution over terminal states plus the mass that did not terminate.

    Keys are ``(BeliefState, Assignment)`` pairs for the semantics with a true
    assignment and plain ``BeliefState`` values for marginals and for the
    belief-only semantics.
    """

    def __init__(self, entries: dict, residual):
        self.entries = {k: v for k, v in entries.items() if v != 0}
        self.residual = Q(residual)

    def terminated_mass(self):
        return sum(self.entries.values(), ZERO)

    def __getitem__(self, key):
        return self.entries.get(key, ZERO)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return (
            isinstance(other, TerminalDistribution)
            and self.entries == other.entries
            and self.residual == other.residual
        )

    def __repr__(self):
        return f"TerminalDistribution({len(self.entries)} leaves, residual={q_str(self.residual)})"

    @property
    def joint(self) -> bool:
        return bool(self.entries) and isinstance(next(iter(self.entries)), tuple)

    def marginal(self) -> "TerminalDistribution":
        """Sum out the true assignment."""
        if not self.joint:
            return self
        acc = {}
        for (beta, _), p in self.entries.items():
            acc[beta] = acc.get(beta, ZERO) + p
        return TerminalDistribution(acc, self.residual)

    def expectation(self, f):
        """``sum_beta P(beta) * f(beta)`` over the terminated part."""
        return sum((p * f(beta) for beta, p in self.marginal().entries.items()), ZERO)

    def sorted_items(self):
        if self.joint:
            return sorted(self.entries.items(), key=lambda kv: (kv[0][0].sort_key(), kv[0][1].values))
        return sorted(self.entries.items(), key=lambda kv: kv[0].sort_key())

    def to_json(self) -> dict:
        leaves = []
        for key, p in self.sorted_items():
            if isinstance(key, tuple):
                beta, sigma = key
                leaves.append({"belief": beta.to_json(), "truth": sigma.as_dict(), "prob": q_str(p)})
            else:
                leaves.append({"belief": key.to_json(), "prob": q_str(p)})
        return {"leaves": leaves, "residual": q_str(self.residual)}


def _prepare(stmt, fuel):
    if fuel is None:
        if not is_loop_free(stmt):
            raise ValueError("programs with loops need a fuel bound")
        return stmt
    if fuel < 0:
        raise ValueError("fuel must be non-negative")
    return bound_loops(stmt, fuel)


def explore(stmt, beta0: BeliefState, sigma0: Assignment, fuel: Optional[int] = None,
            params: Optional[Mapping] = None, sig=None, reverse: bool = False) -> TerminalDistribution:
    """Exhaustive exploration from ``(stmt, beta0, sigma0, 1)``.

    Identical configurations on the frontier are merged by adding their path
    probabilities; this changes nothing about the aggregated leaves.  With
    ``reverse=True`` successors are visited in reverse order (used to check
    order independence).
    """
    program = _prepare(stmt, fuel)
    frontier = {(program, beta0, sigma0): ONE}
    terminal, residual = {}, ZERO
    while frontier:
        nxt = {}
        items = list(frontier.items())
        if reverse:
            items.reverse()
        for (c, beta, sigma), p in items:
            if isinstance(_head(c), Diverge):
                residual += p
                continue
            succs = step(Configuration(c, beta, sigma, ONE), params, sig)
            if reverse:
                succs.reverse()
            for s in succs:
                mass = p * s.pathprob
                if s.continuation is TERMINATED:
                    key = (s.belief, s.truth)
                    terminal[key] = terminal.get(key, ZERO) + mass
                else:
                    key = (s.continuation, s.belief, s.truth)
                    nxt[key] = nxt.get(key, ZERO) + mass
        frontier = nxt
    return TerminalDistribution(terminal, residual)


def exec_from_belief(stmt, beta0: BeliefState, fuel: Optional[int] = None,
                     params: Optional[Mapping] = None, sig=None) -> TerminalDistribution:
    """``[C]^beta0`` over ``(belief, truth)`` pairs: explore from every possible truth."""
    acc, residual = {}, ZERO
    for sigma, w in beta0.items():
        td = explore(stmt, beta0, sigma, fuel, params, sig)
        for key, p in td.entries.items():
            acc[key] = acc.get(key, ZERO) + w * p
        residual += w * td.residual
    return TerminalDistribution(acc, residual)


def exec_alt(stmt, beta0: BeliefState, fuel: Optional[int] = None,
             params: Optional[Mapping] = None, sig=None) -> TerminalDistribution:
    """``[[C]]^beta0`` under the belief-only semantics."""
    program = _prepare(stmt, fuel)
    frontier = {(program, beta0): ONE}
    terminal, residual = {}, ZERO
    while frontier:
        nxt = {}
        for (c, beta), p in frontier.items():
            if isinstance(_head(c), Diverge):
                residual += p
                continue
            for s in step_alt(AltConfiguration(c, beta, ONE), params, sig):
                mass = p * s.pathprob
                if s.continuation is TERMINATED:
                    terminal[s.belief] = terminal.get(s.belief, ZERO) + mass
                else:
                    key = (s.continuation, s.belief)
                    nxt[key] = nxt.get(key, ZERO) + mass
        frontier = nxt
    return TerminalDistribution(terminal, residual)


# ---------------------------------------------------------------------------
# Monte-Carlo simulation


@dataclass(frozen=True)
class Trajectory:
    belief: BeliefState
    truth: Assignment
    terminated: bool
    steps: int

    def to_json(self) -> dict:
        return {
            "belief": self.belief.to_json(),
            "truth": self.truth.as_dict(),
            "terminated": self.terminated,
            "steps": self.steps,
        }


def draw(rng: random.Random, pairs):
    """Draw from exact ``(item, probability)`` pairs without floating point."""
    den = 1
    for _, p in pairs:
        d = int(Q(p).denominator)
        den = den * d // _gcd(den, d)
    r = rng.randrange(den)
    acc = 0
    for item, p in pairs:
        acc += int(Q(p) * den)
        if r < acc:
            return item
    raise ValueError("probabilities do not sum to 1")


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def simulate(stmt, beta0: BeliefState, seed: int, max_steps: int = 1000,
             params: Optional[Mapping] = None, sig=None) -> Trajectory:
    """One seeded run: draw the truth from ``beta0``, then step, drawing at samples.

    ``max_steps`` bounds the number of transitions; exceeding it reports the
    run as not terminated.
    """
    rng = random.Random(seed)
    return _simulate(stmt, beta0, rng, max_steps, params, sig)


def _simulate(stmt, beta0, rng, max_steps, params, sig) -> Trajectory:
    sigma = draw(rng, beta0.items())
    cfg = Configuration(stmt, beta0, sigma, ONE)
    steps = 0
    while cfg.continuation is not TERMINATED:
        if steps >= max_steps:
            return Trajectory(cfg.belief, cfg.truth, False, steps)
        succs = step(Configuration(cfg.continuation, cfg.belief, cfg.truth, ONE), params, sig)
        if len(succs) == 1:
            cfg = succs[0]
        else:
            cfg = draw(rng, [(s, s.pathprob) for s in succs])
        steps += 1
    return Trajectory(cfg.belief, cfg.truth, True, steps)


def simulate_many(stmt, beta0: BeliefState, seed: int, runs: int, max_steps: int = 1000,
                  params: Optional[Mapping] = None, sig=None) -> list:
    """``runs`` trajectories from one seeded generator (deterministic given the seed)."""
    rng = random.Random(seed)
    return [_simulate(stmt, beta0, rng, max_steps, params, sig) for _ in range(runs)]
