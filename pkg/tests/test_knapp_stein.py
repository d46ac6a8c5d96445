from __future__ import annotations

import math

import pytest

from conformal_bidiff.numerics.knapp_stein import _binom, _model, knapp_stein_check, multiplier_table
from conformal_bidiff.numerics.quadrature import NotConvergent


def test_target_multiplier():
    assert multiplier_table([1.0], 2)[1.0] == pytest.approx(2 * math.pi, rel=1e-15)


def test_generalized_binomial():
    assert _binom(-1.0, 1) == -1.0
    assert _binom(-1.0, 3) == -1.0
    assert _binom(2.5, 0) == 1.0
    assert _binom(0.5, 2) == pytest.approx(-0.125)


def test_model_leading_term():
    # H(rho) ~ |S^(d-1)| Gamma(d/2) / 2 * rho^(nu-d) = pi^(d/2) rho^(nu-d)
    s, m = _model(1.0, 2, 3)
    assert s == 0.5
    assert m[0] == pytest.approx(math.pi, rel=1e-14)


@pytest.mark.parametrize("nu", [0.5, 1.0])
def test_multiplier_d2(nu):
    rep = knapp_stein_check(nu, 2)
    assert rep.passed, rep.relative_errors


def test_multiplier_d3():
    rep = knapp_stein_check(1.5, 3)
    assert rep.max_relative_error <= 1e-6


@pytest.mark.parametrize("nu,d", [(2.0, 2), (0.0, 2), (-1.0, 3), (3.5, 3)])
def test_divergent_range(nu, d):
    with pytest.raises(NotConvergent):
        knapp_stein_check(nu, d)
