"""Probabilistic belief programs: parsing, semantics, weakest pre-expectations."""

from ._rational import BACKEND, Q
from .belief import Assignment, BeliefState, condition, initial_belief, observe_update, prob, sample_update
from .checks import check_observability, desugar, load_program, typecheck
from .errors import (
    DomainError,
    DomainRequired,
    MixedStrategies,
    NotExpressible,
    ParameterError,
    ParseError,
    PblimpError,
    SemanticsViolation,
    StrategyMissing,
    TypeCheckError,
    UnprovedInvariant,
    ZeroProbabilityObservation,
)
from .normal import NormalForm, normalize
from .operational import exec_alt, exec_from_belief, explore, simulate, simulate_many, step, step_alt
from .parser import parse, parse_expr, parse_prop, parse_statement
from .predicates import GPredicate, eval_predicate, parse_predicate
from .wp import (
    CharacteristicFunction,
    Falsified,
    Invariant,
    Proved,
    Unknown,
    Unroll,
    apply_characteristic,
    bound_program,
    check_invariant,
    mod_set,
    simplify_independent,
    wp_eval,
    wp_loopfree,
    wp_unroll,
)

__version__ = "0.1.0"
