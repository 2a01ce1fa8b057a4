import random

from hypothesis import given, strategies as st

from pblimp import Q
from pblimp.poly import Poly, format_poly

q = Poly.param("q")
r = Poly.param("r")


def test_arithmetic():
    p = (q + Poly.const(1)) * (q - Poly.const(1))
    assert p == q * q - Poly.const(1)
    assert p.evaluate({"q": Q(1, 2)}) == Q(-3, 4)
    assert (q * Q(0)).is_zero()
    assert Poly.of(Q(3)).is_const() and Poly.of(Q(3)).constant() == 3
    assert (q * r).params() == {"q", "r"}


def test_substitute():
    p = q * q + r
    assert p.substitute("q", Poly.const(2)) == Poly.const(4) + r


def test_format():
    assert format_poly(Poly()) == "0"
    assert "q" in format_poly(q * Q(1, 2))


def test_nonneg_on_box_examples():
    unit = {"q": (Q(0), Q(1))}
    assert q.nonneg_on_box(unit)
    assert (Poly.const(1) - q).nonneg_on_box(unit)
    assert not (q - Poly.const(Q(1, 2))).nonneg_on_box(unit)
    assert (q - Poly.const(Q(1, 2))).nonneg_on_box({"q": (Q(1, 2), Q(1))})
    # (q - 1/2)^2 is non-negative; Bernstein on [0, 1] is inconclusive but a split box is not
    sq = (q - Poly.const(Q(1, 2))) * (q - Poly.const(Q(1, 2)))
    assert sq.nonneg_on_box({"q": (Q(1, 2), Q(1))})


def polys():
    def build(seed):
        rng = random.Random(seed)
        p = Poly()
        for _ in range(rng.randint(1, 4)):
            mono = Poly.const(Q(rng.randint(-4, 4), rng.randint(1, 4)))
            for _ in range(rng.randint(0, 2)):
                mono = mono * rng.choice([q, r])
            p = p + mono
        return p

    return st.integers(0, 10**6).map(build)


@given(polys())
def test_nonneg_on_box_is_sound(p):
    box = {"q": (Q(0), Q(1)), "r": (Q(1, 4), Q(3, 4))}
    if p.nonneg_on_box(box):
        for i in range(11):
            for j in range(11):
                point = {"q": Q(i, 10), "r": Q(1, 4) + Q(j, 20)}
                assert p.evaluate(point) >= 0


@given(polys(), polys())
def test_ring_laws(a, b):
    point = {"q": Q(1, 3), "r": Q(2, 5)}
    assert (a + b).evaluate(point) == a.evaluate(point) + b.evaluate(point)
    assert (a * b).evaluate(point) == a.evaluate(point) * b.evaluate(point)
    assert a * b == b * a
    assert (a - a).is_zero()
