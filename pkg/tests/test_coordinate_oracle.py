from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conformal_bidiff.coordinate_oracle import (
    CoordOperator,
    SymbolPoly,
    apply_coord,
    coord_kernel,
    coordinate,
    cross_validate,
    embed,
    evaluate_flat,
    formal_adjoint,
    lap_coord,
    mul_coord,
    partial_coord,
    symbol,
    symbol_monomials,
    to_coord_operator,
)
from conformal_bidiff.exact_ring import ParamRat, rho, var
from conformal_bidiff.invariant_calculus import kernel
from conformal_bidiff.operators import build_B, build_F
from conformal_bidiff.words import Gen, MulCoord, OperatorChain, OperatorExpr, Partial

lam, mu = var("lam"), var("mu")
ZERO_BETA = {"b1": 0, "b2": 0, "b3": 0}


def op(*gens):
    return OperatorExpr.gen(*gens)


def test_partial_of_radial_power():
    b3 = Fraction(2, 5)
    beta = {"b1": 0, "b2": 0, "b3": b3}
    X = embed(kernel(), 2, beta)
    expected = mul_coord("y", 1, embed(kernel(-1, 0, 0, b3), 2, beta))
    assert partial_coord("y", 1, X) == expected


def test_partial_z_of_difference_power():
    b1 = Fraction(3, 7)
    beta = {"b1": b1, "b2": 0, "b3": 0}
    X = embed(kernel(), 2, beta)
    base = embed(kernel(0, 0, -1, -b1), 2, beta)
    expected = mul_coord("y", 1, base) - mul_coord("z", 1, base)
    assert partial_coord("z", 1, X) == expected


def test_laplacian_of_power_d3():
    b3 = Fraction(-5, 3)
    beta = {"b1": 0, "b2": 0, "b3": b3}
    X = embed(kernel(), 3, beta)
    assert lap_coord("y", X) == embed(kernel(-1, 0, 0, b3 * (b3 + 1)), 3, beta)


def test_embed_examples():
    s = embed(kernel(1, 0, 0), 2, ZERO_BETA)
    y1, y2 = coordinate(2, "y", 1), coordinate(2, "y", 2)
    z1, z2 = coordinate(2, "z", 1), coordinate(2, "z", 2)
    assert s == embed(kernel(), 2, ZERO_BETA).mul_poly(
        (y1.mul_poly(y1.polynomial_part()) + y2.mul_poly(y2.polynomial_part())).polynomial_part())
    r = embed(kernel(0, 0, 1), 2, ZERO_BETA)
    u, v = y1 - z1, y2 - z2
    assert r == u.mul_poly(u.polynomial_part()) + v.mul_poly(v.polynomial_part())


def test_adjoint_of_derivative():
    D = CoordOperator.derivative(2, 0)
    assert formal_adjoint(D) == -D


def test_adjoint_with_leibniz_term():
    P = to_coord_operator(op(MulCoord("y", 1), Partial("y", 1)), 2)
    expected = -P - CoordOperator.identity(2)
    assert formal_adjoint(P) == expected


@pytest.mark.parametrize("dim", [2, 3])
def test_double_adjoint(dim):
    B = to_coord_operator(build_B(), dim)
    assert formal_adjoint(formal_adjoint(B)) == B


def test_symbol_examples():
    assert symbol(op(Gen.LAP_Y), 2) == SymbolPoly(2, {(1, 0, 0): 1})
    assert symbol(op(Gen.MIXED_R), 3) == SymbolPoly(3, {(0, 1, 0): 1})
    assert symbol(op(Gen.LAP_Z), 2) == SymbolPoly(2, {(0, 0, 1): 1})


@pytest.mark.parametrize("dim", [2, 3])
def test_symbol_of_F(dim):
    r = rho().substitute({"d": dim})
    expected = SymbolPoly(dim, {
        (1, 0, 0): 4 * (mu + 1) * (mu + r),
        (0, 1, 0): -8 * (lam + 1) * (mu + 1),
        (0, 0, 1): 4 * (lam + 1) * (lam + r),
    })
    assert symbol(OperatorChain((build_F(),), diagonal=True), dim) == expected


@settings(max_examples=15)
@given(st.lists(st.sampled_from([Gen.LAP_Y, Gen.LAP_Z, Gen.MIXED_R]), min_size=1, max_size=2),
       st.lists(st.sampled_from([Gen.LAP_Y, Gen.LAP_Z, Gen.MIXED_R]), min_size=1, max_size=2))
def test_symbol_is_multiplicative(p, q):
    P, Q = op(*p), op(*q)
    assert symbol(P @ Q, 2) == symbol(P, 2) * symbol(Q, 2)


def test_symbol_monomials_of_laplacian():
    mons = symbol_monomials(SymbolPoly(2, {(1, 0, 0): 1}), 2)
    assert mons == {(2, 0, 0, 0): ParamRat(1), (0, 2, 0, 0): ParamRat(1)}


def test_evaluate_flat():
    P = to_coord_operator(op(MulCoord("y", 1)), 2).terms[(0, 0, 0, 0)]
    x = np.array([[3.0, 1.0, 0.0, 2.0]])
    assert evaluate_flat(P, {}, x)[0] == 3.0


def test_bernstein_sato_in_coordinates():
    beta = {"b1": 1, "b2": 1, "b3": 1}
    from conformal_bidiff.operators import b_poly

    lhs = apply_coord(build_B().substitute(beta), embed(kernel(0, 0, 1), 3, beta))
    b = b_poly(1, 1, 1, 3).constant_value()
    assert lhs == embed(kernel(0, 0, 0, b), 3, beta)


def test_cross_validate_small():
    rep = cross_validate(5, (2, 3), seed=7)
    assert rep.passed and rep.cases == 60
