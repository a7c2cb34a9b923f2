import os
import random
import sys
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from carnot_lab.algebra import GradedVector, direct_sum  # noqa: E402
from carnot_lab.catalog import (  # noqa: E402
    complex_heisenberg,
    euclidean,
    example_section4,
    filiform,
    heisenberg,
    heisenberg_power,
)

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

os.environ.setdefault("CARNOT_LAB_THREADS", "1")


def named_algebras():
    """The algebras used by the group-law acceptance run."""
    return {
        "H1": heisenberg(1),
        "H2": heisenberg(2),
        "H1C": complex_heisenberg(1),
        "F3": filiform(3),
        "F5": filiform(5),
        "H1+H1": heisenberg_power(1, 2),
        "example4": example_section4(),
    }


def extra_algebras():
    return {
        "R3": euclidean(3),
        "R1+H1": direct_sum(euclidean(1), heisenberg(1)),
        "F3+R2": direct_sum(filiform(3), euclidean(2)),
        "F4": filiform(4),
    }


ALL = {**named_algebras(), **extra_algebras()}


@pytest.fixture(params=sorted(ALL))
def any_algebra(request):
    return ALL[request.param]


@pytest.fixture
def rng():
    return random.Random(20240611)


def vec(*coords) -> GradedVector:
    return GradedVector(tuple(Fraction(c) for c in coords))


small_fractions = st.fractions(min_value=-6, max_value=6, max_denominator=5)


def vectors(dim: int):
    return st.lists(small_fractions, min_size=dim, max_size=dim).map(lambda c: GradedVector(tuple(c)))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        status, title, seconds = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}  ({seconds:.1f} s)")
