from __future__ import annotations

from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings

from conformal_bidiff.coordinate_oracle import apply_coord, embed, formal_adjoint, symbol, to_coord_operator
from conformal_bidiff.exact_ring import ParamPoly, ParamRat, rho, var
from conformal_bidiff.invariant_calculus import apply_word, kernel, swap_yz
from conformal_bidiff.operators import (
    IdentityFailed,
    PoleAtParameter,
    b_poly,
    beta_to_lambda,
    build_B,
    build_C,
    build_E,
    build_F,
    build_F_k,
    build_OR_Dk,
    c_in_lambda,
    c_k_over_c0,
    c_rst,
    compare_symbols,
    knapp_stein_multiplier,
    lambda_to_beta,
    n_constant,
    or_coefficient,
    recursion_consistency,
    verify_bernstein_sato,
)
from conformal_bidiff.words import Gen, OperatorExpr
from conftest import fractions

lam, mu, d = var("lam"), var("mu"), var("d")
b1, b2, b3 = var("b1"), var("b2"), var("b3")


def test_b_poly_values():
    assert b_poly(0, 0, 0, 2) == ParamPoly.coerce(64)
    assert b_poly(-d).is_zero()


def test_B_has_six_words():
    assert len(build_B().words) == 6


def test_bernstein_sato_symbolic():
    rep = verify_bernstein_sato()
    assert rep.passed and rep.residual.is_zero()


def test_bernstein_sato_negative_control():
    with pytest.raises(IdentityFailed) as info:
        verify_bernstein_sato(1)
    assert info.value.residual == kernel(0, 0, 0, -1)


def test_bernstein_sato_coordinates_d3():
    beta = {"b1": 1, "b2": 1, "b3": 1}
    X = embed(kernel(0, 0, 1), 3, beta)
    bval = b_poly(1, 1, 1, 3)
    assert apply_coord(build_B(), X) == embed(kernel(0, 0, 0, bval), 3, beta)


def test_transpose_of_E_is_F():
    assert formal_adjoint(build_E(), 2) == to_coord_operator(build_F(), 2)


@pytest.mark.parametrize("dim", [2, 3])
def test_transpose_of_B_is_C(dim):
    assert formal_adjoint(build_B(), dim) == to_coord_operator(build_C(), dim)


def test_C_is_F_in_lambda_coordinates():
    C, F = c_in_lambda()
    assert C == F
    assert "b1" not in {v for c in C.words.values() for v in c.num.variables()}


def test_F_exchange_symmetry():
    F = build_F(lam, lam)
    K = kernel(1, -1, 2, lam)
    assert swap_yz(apply_word(F, K)) == apply_word(F, swap_yz(K))


def test_lambda_beta_inverse():
    back = lambda_to_beta(beta_to_lambda())
    assert tuple(back) == (b1, b2, b3)
    fwd = beta_to_lambda(lambda_to_beta((var("lam"), var("mu"), var("b1"))))
    assert tuple(fwd) == (var("lam"), var("mu"), var("b1"))


def test_lambda_of_critical_point():
    beta = (Fraction(-8, 3),) * 3
    lams = beta_to_lambda(beta).substitute({"d": 3})
    assert all(x == ParamPoly.coerce(Fraction(-7, 6)) for x in lams)


@given(fractions, fractions, fractions)
def test_sum_of_lambdas(x, y, z):
    lams = beta_to_lambda((x, y, z))
    assert lams.first + lams.second + lams.third - 3 * rho() == ParamPoly.coerce(x + y + z)


def test_c_rst_examples():
    r = rho()
    assert c_rst(0, 0, 1) == ParamRat(-(lam + r), mu + 1)
    assert c_rst(1, 0, 0) == ParamRat(-(mu + r), lam + 1)
    assert c_rst(0, 1, 0) == ParamRat(1)
    assert or_coefficient(0, 1, 0, "display") == ParamRat(2)


def test_c_rst_reflection():
    for r_, s_, t_ in [(2, 0, 1), (1, 1, 0), (3, 0, 0)]:
        swapped = c_rst(t_, s_, r_, mu, lam)
        assert c_rst(r_, s_, t_) == swapped


def test_F_k_zero_is_identity():
    assert symbol(build_F_k(0), 2).terms == {(0, 0, 0): ParamRat(1)}
    assert build_OR_Dk(0).words == {(): ParamRat(1)}


@pytest.mark.parametrize("dim", [2, 3])
def test_k1_ratio_display(dim):
    comp = compare_symbols(1, dim, "display")
    assert comp.proportional
    assert comp.ratio == ParamRat(-4 * (lam + 1) * (mu + 1))


@pytest.mark.parametrize("dim", [2, 3])
def test_k1_formula_convention_not_proportional(dim):
    assert not compare_symbols(1, dim, "formula").proportional


def test_c_k_over_c0():
    assert c_k_over_c0(0) == ParamRat(1)
    c2 = c_k_over_c0(2)
    for pole in (0, 2):
        assert c2.den.substitute({"b1": pole}).substitute({"d": 3}).is_zero()
    assert not c2.den.substitute({"b1": 4, "d": 3}).is_zero()


@pytest.mark.parametrize("k", range(6))
def test_recursion(k):
    assert recursion_consistency(k)


def test_knapp_stein_constant():
    with mpmath.workdps(40):
        assert abs(knapp_stein_multiplier(1, 2) - 2 * mpmath.pi) < mpmath.mpf(10) ** -30
    with pytest.raises(PoleAtParameter):
        knapp_stein_multiplier(-2, 2)


def test_n_constant_poles():
    with pytest.raises(PoleAtParameter):
        n_constant(0, Fraction(1, 3), 2)
    val = n_constant(Fraction(1, 3), Fraction(1, 5), 2)
    assert mpmath.isfinite(val) and val != 0
