from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from conformal_bidiff.exact_ring import NPARAMS, ParamPoly
from conformal_bidiff.invariant_calculus import InvariantKernel

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

fractions = st.builds(Fraction, st.integers(-9, 9), st.integers(1, 6))
nonzero_fractions = fractions.filter(bool)

monomials = st.tuples(*[st.integers(0, 2)] * NPARAMS)


@st.composite
def param_polys(draw, max_terms: int = 4):
    terms = draw(st.dictionaries(monomials, nonzero_fractions, max_size=max_terms))
    return ParamPoly(terms)


@st.composite
def small_polys(draw):
    """Polynomials in lam and mu only, so products stay cheap."""
    mono = st.tuples(st.just(0), st.just(0), st.just(0), st.integers(0, 2), st.integers(0, 2), st.just(0))
    return ParamPoly(draw(st.dictionaries(mono, nonzero_fractions, min_size=1, max_size=3)))


offsets = st.tuples(*[st.integers(-1, 1)] * 3)


@st.composite
def kernels(draw, max_terms: int = 2):
    terms = draw(st.dictionaries(offsets, nonzero_fractions, min_size=1, max_size=max_terms))
    return InvariantKernel(terms)


betas = st.fixed_dictionaries({b: fractions for b in ("b1", "b2", "b3")})


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


@pytest.fixture
def verdict():
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
