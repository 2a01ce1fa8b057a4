"""Polynomials in the declared parameters with exact rational coefficients.

Predicates may multiply terms by parameters (``Pr(inCare) * q``), so scalar
coefficients are polynomials.  A monomial is a sorted tuple of parameter
names, repeated for higher powers; ``()`` is the constant monomial.
"""

from __future__ import annotations

import itertools
from math import comb
from typing import Mapping

from ._rational import ONE, ZERO, Q, q_short


def mono_mul(a: tuple, b: tuple) -> tuple:
    return tuple(sorted(a + b))


class Poly:
    __slots__ = ("terms", "_hash")

    def __init__(self, terms=None):
        clean = {}
        for mono, c in (terms or {}).items():
            if c != 0:
                clean[mono] = Q(c)
        self.terms = clean
        self._hash = None

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): Q(c)})

    @classmethod
    def param(cls, name: str) -> "Poly":
        return cls({(name,): ONE})

    @classmethod
    def of(cls, value) -> "Poly":
        """A rational constant or a parameter name."""
        if isinstance(value, Poly):
            return value
        if isinstance(value, str):
            return cls.param(value)
        return cls.const(value)

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(m == () for m in self.terms)

    def constant(self):
        return self.terms.get((), ZERO)

    def params(self) -> set:
        return {p for m in self.terms for p in m}

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, ZERO) + c
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.const(other)
        out = {}
        for (m1, c1), (m2, c2) in itertools.product(self.terms.items(), other.terms.items()):
            m = mono_mul(m1, m2)
            out[m] = out.get(m, ZERO) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def evaluate(self, params: Mapping):
        total = ZERO
        for m, c in self.terms.items():
            v = c
            for p in m:
                v *= Q(params[p])
            total += v
        return total

    def __eq__(self, other):
        if not isinstance(other, Poly):
            try:
                other = Poly.const(other)
            except TypeError:
                return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __repr__(self):
        return f"Poly({format_poly(self)})"

    def nonneg_on_box(self, box: Mapping) -> bool:
        """Sufficient test for ``p >= 0`` on a box of parameter intervals.

        Each parameter is rescaled to [0, 1] and the polynomial is expanded in
        the Bernstein basis; non-negative Bernstein coefficients imply a
        non-negative polynomial.  Returns False when the test is inconclusive.
        """
        if self.is_zero():
            return True
        if self.is_const():
            return self.constant() >= 0
        names = sorted(self.params())
        # substitute p = lo + (hi - lo) * t
        poly = Poly.const(1) * self
        for name in names:
            lo, hi = box.get(name, (ZERO, ONE))
            lo, hi = Q(lo), Q(hi)
            poly = poly.substitute(name, Poly({(): lo, (name,): hi - lo}))
        degrees = {n: 0 for n in names}
        for m in poly.terms:
            for n in names:
                degrees[n] = max(degrees[n], m.count(n))
        coeffs = {}
        for m, c in poly.terms.items():
            coeffs[tuple(m.count(n) for n in names)] = c
        ranges = [range(degrees[n] + 1) for n in names]
        for beta in itertools.product(*ranges):
            b = ZERO
            for alpha, c in coeffs.items():
                if all(a <= bb for a, bb in zip(alpha, beta)):
                    w = Q(1)
                    for a, bb, n in zip(alpha, beta, names):
                        w *= Q(comb(bb, a), comb(degrees[n], a))
                    b += w * c
            if b < 0:
                return False
        return True

    def substitute(self, name: str, value: "Poly") -> "Poly":
        out = Poly()
        for m, c in self.terms.items():
            k = m.count(name)
            rest = tuple(p for p in m if p != name)
            term = Poly({rest: c})
            for _ in range(k):
                term = term * value
            out = out + term
        return out


ZERO_POLY = Poly()
ONE_POLY = Poly.const(1)


def format_mono(m: tuple) -> str:
    return " * ".join(m)


def format_poly(p: Poly) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for m in sorted(p.terms, key=lambda m: (len(m), m)):
        c = p.terms[m]
        if not m:
            parts.append(q_short(c))
        elif c == 1:
            parts.append(format_mono(m))
        else:
            parts.append(f"{q_short(c)} * {format_mono(m)}")
    return " + ".join(parts)
