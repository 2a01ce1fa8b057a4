"""Exception hierarchy shared by all pblimp modules."""

from __future__ import annotations


class PblimpError(Exception):
    """Base class for every error raised by this package."""


class ParseError(PblimpError):
    def __init__(self, message: str, line: int, column: int, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(sorted(set(expected)))
        where = f"{line}:{column}"
        if self.expected:
            message = f"{message} (expected one of: {', '.join(self.expected)})"
        super().__init__(f"{where}: {message}")
        self.message = message


class TypeCheckError(PblimpError):
    """Raised when a program violates the observability discipline."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class DomainError(PblimpError):
    """A value left the declared finite domain of a variable."""


class ZeroProbabilityObservation(PblimpError):
    """Conditioning on an event of probability zero."""


class ParameterError(PblimpError):
    """A parameter is unbound, unknown, or has an invalid value."""


class NotExpressible(PblimpError):
    """The program falls outside the syntactically expressible fragment."""


class DomainRequired(PblimpError):
    """A finite domain is needed but the variable declares none."""


class StrategyError(PblimpError):
    """Base class for loop-strategy problems in bound computations."""


class StrategyMissing(StrategyError):
    pass


class UnprovedInvariant(StrategyError):
    pass


class MixedStrategies(StrategyError):
    pass


class SemanticsViolation(PblimpError):
    """An internal invariant of the operational semantics did not hold."""
