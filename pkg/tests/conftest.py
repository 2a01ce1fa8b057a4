import os
import random
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from pblimp import BeliefState, Q, load_program

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = ROOT / "programs"


def belief(names, *pairs):
    """``belief(("x", "y"), ((0, 0), "1/3"), ...)`` with string or rational weights."""
    return BeliefState.from_pairs(names, [(v, Q(p) if not isinstance(p, str) else _q(p)) for v, p in pairs])


def _q(text):
    from pblimp._rational import as_q

    return as_q(text)


@pytest.fixture(scope="session")
def treat():
    return load_program((PROGRAMS / "treat.pbl").read_text())


@pytest.fixture(scope="session")
def treat_sig(treat):
    return treat.signature


@pytest.fixture
def rng():
    return random.Random(1234)
