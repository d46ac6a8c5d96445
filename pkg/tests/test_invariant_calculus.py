from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conformal_bidiff.coordinate_oracle import apply_coord, embed
from conformal_bidiff.exact_ring import var
from conformal_bidiff.invariant_calculus import (
    GENERATORS,
    InvariantKernel,
    apply_word,
    euler_yz,
    euler_zy,
    is_zero,
    kernel,
    lap_y,
    lap_z,
    mixed_R,
    mul_invariant,
    partial,
    swap_yz,
)
from conformal_bidiff.words import Gen, MulCoord, OperatorExpr, Partial, UnsupportedGenerator
from conftest import betas, kernels, small_polys

b1, b3, d = var("b1"), var("b3"), var("d")
ZERO_BETA = {"b1": 0, "b2": 0, "b3": 0}


def test_partial_r_power_rule():
    assert partial("r", kernel()) == kernel(0, 0, -1, b1 / 2)


def test_partial_s_of_plain_s():
    K = kernel(1, 0, 0).substitute({"b3": 0})
    assert partial("s", K).substitute({"b3": 0}) == kernel(0, 0, 0)


@given(kernels(), st.sampled_from("str"), st.sampled_from("str"))
def test_mixed_partials_commute(K, u, v):
    assert partial(u, partial(v, K)) == partial(v, partial(u, K))


def test_mul_invariant_shifts():
    assert mul_invariant("r", kernel()) == kernel(0, 0, 1)
    assert mul_invariant("s", InvariantKernel()).is_zero()


def test_commutator_of_r():
    # d_r (r K) - r d_r K = K on a single monomial
    K = kernel(1, -1, 2)
    lhs = partial("r", mul_invariant("r", K)) - mul_invariant("r", partial("r", K))
    assert lhs == K


def test_lap_y_of_s_is_2d():
    K = kernel(1, 0, 0)
    out = lap_y(K).substitute(ZERO_BETA)
    assert out == kernel(0, 0, 0, 2 * d)


def test_lap_y_of_pure_power():
    # Lap_y |y|^b3 = b3 (b3 + d - 2) |y|^(b3 - 2)
    out = lap_y(kernel()).substitute({"b1": 0})
    assert out == kernel(-1, 0, 0, b3 * (b3 + d - 2)).substitute({"b1": 0})


def test_euler_of_constant_vanishes():
    K = kernel().substitute(ZERO_BETA)
    assert euler_yz(K).substitute(ZERO_BETA).is_zero()
    assert euler_zy(K).substitute(ZERO_BETA).is_zero()


def test_identity_word():
    K = kernel(1, 0, -1, var("lam"))
    assert apply_word(OperatorExpr.identity(), K) == K
    assert is_zero(K - K)


def test_rightmost_generator_acts_first():
    K = kernel(0, 1, 0)
    word = OperatorExpr.gen(Gen.LAP_Y, Gen.MUL_R)
    assert apply_word(word, K) == lap_y(mul_invariant("r", K))


def test_coordinate_generators_rejected():
    with pytest.raises(UnsupportedGenerator):
        apply_word(OperatorExpr.gen(Partial("y", 1)), kernel())
    with pytest.raises(UnsupportedGenerator):
        apply_word(OperatorExpr.gen(MulCoord("z", 2)), kernel())


def test_lap_lap_on_st_matches_oracle():
    K = kernel(1, 1, 0)
    word = OperatorExpr.gen(Gen.LAP_Y, Gen.LAP_Y)
    assert embed(apply_word(word, K), 2, ZERO_BETA) == apply_coord(word, embed(K, 2, ZERO_BETA))


@settings(max_examples=40)
@given(kernels(), small_polys(), small_polys(), kernels(), st.sampled_from(list(GENERATORS)))
def test_linearity(K1, a, b, K2, g):
    rule = GENERATORS[g]
    assert rule(K1 * a + K2 * b) == rule(K1) * a + rule(K2) * b


@given(kernels())
def test_swap_intertwines(K):
    assert swap_yz(lap_y(K)) == lap_z(swap_yz(K))
    assert swap_yz(euler_yz(K)) == euler_zy(swap_yz(K))
    assert swap_yz(mixed_R(K)) == mixed_R(swap_yz(K))


@settings(max_examples=25)
@given(kernels(), betas, st.sampled_from(list(GENERATORS)), st.sampled_from([2, 3]))
def test_generators_match_oracle(K, beta, g, dim):
    rule = GENERATORS[g]
    lhs = embed(rule(K), dim, beta)
    rhs = apply_coord(OperatorExpr.gen(g), embed(K, dim, beta))
    assert lhs == rhs


@pytest.mark.parametrize("g", list(GENERATORS))
def test_generators_match_oracle_symbolic_beta(g):
    K = kernel(0, 0, 0) + kernel(1, -1, 1, var("lam") + 3)
    assert embed(GENERATORS[g](K), 2) == apply_coord(OperatorExpr.gen(g), embed(K, 2))


def test_text_roundtrip():
    K = kernel(0, 0, 1, b1 + Fraction(1, 2)) + kernel(-1, 2, 0, d)
    assert InvariantKernel.parse(K.to_text()) == K
    assert InvariantKernel.parse("0").is_zero()
