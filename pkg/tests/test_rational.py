import os
import subprocess
import sys
from fractions import Fraction

import pytest

from pblimp._rational import BACKEND, Q, as_q, q_floor, q_short, q_str


def test_as_q_accepts_text():
    assert as_q("3/4") == Q(3, 4)
    assert as_q("0.95") == Q(19, 20)
    assert as_q(2) == 2


def test_as_q_rejects_floats_and_garbage():
    with pytest.raises(TypeError):
        as_q(0.5)
    with pytest.raises(ValueError):
        as_q("half")


def test_rendering():
    assert q_str(Q(2)) == "2/1"
    assert q_short(Q(2)) == "2"
    assert q_short(Q(-3, 6)) == "-1/2"
    assert q_floor(Q(7, 2)) == 3


def test_backend_name():
    assert BACKEND in ("gmpy2", "fractions")


def test_pure_python_switch():
    env = dict(os.environ, PBLIMP_PURE_PYTHON="1")
    code = "import pblimp; print(pblimp.BACKEND, pblimp.Q(1, 3) + pblimp.Q(1, 6))"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["fractions", "1/2"]


def test_backends_agree_with_fraction():
    assert Fraction(str(Q(27, 800) + Q(177417, 5120000))) == Fraction(27, 800) + Fraction(177417, 5120000)
