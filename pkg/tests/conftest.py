from fractions import Fraction

import pytest

from sspbound import corpus
from sspbound.frontend import load_model

ZERO_MODEL = """
var x = 3;
while x >= 1 do
{ x := x - 1; }
od
"""


@pytest.fixture(scope="session")
def models():
    return {name: corpus.load(name) for name in corpus.ALL_MODELS}


@pytest.fixture(scope="session")
def gambler():
    return corpus.load("gambler")


@pytest.fixture(scope="session")
def zero_model():
    return load_model(ZERO_MODEL)


def frac(v) -> Fraction:
    return Fraction(v).limit_denominator(10**6)


# one PASS/FAIL line per acceptance criterion, shown at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
