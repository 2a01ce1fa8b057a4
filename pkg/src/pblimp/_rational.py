"""Exact rational numbers.

The compiled ``gmpy2.mpq`` type is used when it can be imported, with
:class:`fractions.Fraction` as the pure-Python fallback.  Set the environment
variable ``PBLIMP_PURE_PYTHON=1`` before import to force the fallback.
"""

from __future__ import annotations

import os
from fractions import Fraction

BACKEND = "fractions"
Q = Fraction

if not os.environ.get("PBLIMP_PURE_PYTHON"):
    try:
        from gmpy2 import mpq as Q  # type: ignore[no-redef]

        BACKEND = "gmpy2"
    except ImportError:  # pragma: no cover - depends on the environment
        pass

ZERO = Q(0)
ONE = Q(1)


def as_q(value) -> "Q":
    """Convert ints, rationals and strings such as ``"3/4"`` or ``"0.9"``."""
    if isinstance(value, str):
        text = value.strip()
        try:
            return Q(Fraction(text))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational number: {value!r}") from exc
    if isinstance(value, float):
        raise TypeError("floats are not accepted; pass a string or a Fraction")
    return Q(value)


def q_str(value) -> str:
    """Render as ``"num/den"`` (always with a denominator)."""
    value = Q(value)
    return f"{int(value.numerator)}/{int(value.denominator)}"


def q_short(value) -> str:
    """Render as ``"num"`` for integers, ``"num/den"`` otherwise."""
    value = Q(value)
    if value.denominator == 1:
        return str(int(value.numerator))
    return q_str(value)


def q_floor(value) -> int:
    value = Q(value)
    return int(value.numerator) // int(value.denominator)
