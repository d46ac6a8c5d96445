from __future__ import annotations

from math import factorial

import numpy as np
import pytest

from conformal_bidiff.coordinate_oracle import formal_adjoint, symbol, to_coord_operator
from conformal_bidiff.numerics.covariance import (
    BiDiff,
    StencilTooWide,
    adjoint_pairing_residual,
    class_element,
    covariance_residual,
    covariance_sweep,
    duality_residual,
    fd_derivative,
    fd_step,
    fd_weights,
    pi_apply,
    sample_points,
)
from conformal_bidiff.numerics.group import Dilate, GroupElement, Invert, Translate, identity, random_element
from conformal_bidiff.numerics.testfunc import TestFunction, random_test_function
from conformal_bidiff.operators import build_B, build_F_k, or_symbol


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_fd_weights_reproduce_monomials(m):
    offs, ws = fd_weights(m)
    for q in range(m + 8):
        moment = sum(w * o ** q for o, w in zip(offs, ws))
        assert moment == pytest.approx(factorial(m) if q == m else 0.0, abs=1e-9)


def test_fd_derivative_of_gaussian():
    f = TestFunction.gaussian(2, width=0.8, centre=[0.1, -0.2])
    x = np.array([[0.3, 0.4], [-0.5, 0.0]])
    for alpha in [(1, 0), (2, 0), (1, 1), (2, 2)]:
        approx = fd_derivative(f, x, alpha, np.full(len(x), 0.8))
        assert np.allclose(approx, f.derivative(alpha)(x), atol=1e-8)


def test_pi_identity_and_dilation():
    f = TestFunction.gaussian(2, centre=[0.3, 0.1])
    x = np.array([[0.2, 0.7], [1.0, -1.0]])
    assert np.array_equal(pi_apply(identity(), 0.37, f, x), f(x))
    g = GroupElement((Dilate(1.7),))
    assert np.allclose(pi_apply(g, -1.0, f, x), f(x / 1.7), rtol=1e-15)


def _op(k, sym=None, lam=1 / 3, mu=1 / 5, d=2):
    sym = sym if sym is not None else symbol(build_F_k(k), d)
    return BiDiff.from_symbol(sym, d, {"lam": lam, "mu": mu})


# artifact tolerance: 1e-9 is the finite-difference noise floor of order-8 stencils
@pytest.mark.parametrize("label", ["F1", "D1"])
def test_translation_covariance(label):
    rng = np.random.default_rng(11)
    sym = symbol(build_F_k(1), 2) if label == "F1" else or_symbol(1, "display")
    g = GroupElement((Translate(rng.uniform(-1, 1, 2)),))
    f = random_test_function(rng, 2, blocks=2)
    x = sample_points(rng, g, f, 2, 20)
    assert covariance_residual(_op(1, sym), 1 / 3, 1 / 5, 1, g, f, x).residual <= 1e-9


def test_F1_inversion_covariance():
    rng = np.random.default_rng(5)
    g = GroupElement((Translate([0.4, -0.3]), Invert(), Translate([-0.2, 0.5])))
    f = random_test_function(rng, 2, blocks=2)
    x = sample_points(rng, g, f, 2, 20)
    rep = covariance_residual(_op(1), 1 / 3, 1 / 5, 1, g, f, x)
    assert rep.residual <= 1e-6
    assert rep.nu == pytest.approx(1 / 3 + 1 / 5 + 1 + 2)


def test_wrong_nu_is_detected():
    rng = np.random.default_rng(5)
    g = GroupElement((Translate([0.4, -0.3]), Invert(), Translate([-0.2, 0.5])))
    f = random_test_function(rng, 2, blocks=2)
    x = sample_points(rng, g, f, 2, 20)
    assert covariance_residual(_op(1), 1 / 3, 1 / 5, 2, g, f, x).residual > 1e-2


def test_convention_adjudication():
    rows = covariance_sweep({"display": (or_symbol(1, "display"), 1), "formula": (or_symbol(1, "formula"), 1)},
                            classes=("invert",), points=10)
    worst = {lab: max(r.residual for r in rows if r.label == lab) for lab in ("display", "formula")}
    assert worst["display"] <= 1e-6 < worst["formula"]


def test_F2_sweep():
    rows = covariance_sweep({"F2": (symbol(build_F_k(2), 2), 2)}, points=20)
    assert max(r.residual for r in rows) <= 1e-6


def test_stencil_too_wide():
    g = GroupElement((Invert(),))
    f = TestFunction.gaussian(4, centre=[0.5, 0.5, 0.5, 0.5])
    # F^(1) has total order 2, so one stencil node lands on the inversion centre
    x = np.array([[fd_step(2, 1.0), 0.0]])
    with pytest.raises(StencilTooWide):
        covariance_residual(_op(1), 1 / 3, 1 / 5, 1, g, f, x, scale=np.array([1.0]))


@pytest.mark.parametrize("d", [2, 3])
def test_adjoint_pairing_of_B(d):
    rng = np.random.default_rng(d)
    B = to_coord_operator(build_B(), d)
    Bt = formal_adjoint(B)
    params = {"b1": 0.3, "b2": -0.4, "b3": 0.7, "d": d}
    f = random_test_function(rng, d, blocks=2)
    h = random_test_function(rng, d, blocks=2)
    # 8 Gauss-Hermite nodes per axis integrate the degree <= 10 polynomial part exactly
    assert adjoint_pairing_residual(B, Bt, params, f, h, nodes=8) <= 1e-8


def test_duality():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(5):
        g = random_element(rng, 2, 4)
        lam = float(rng.uniform(-0.5, 0.5))
        phi, psi = random_test_function(rng, 2), random_test_function(rng, 2)
        res, _, _ = duality_residual(g, lam, phi, psi, n=401)
        worst = max(worst, res)
    assert worst <= 1e-6


def test_class_element_rejects_unknown():
    with pytest.raises(ValueError):
        class_element(np.random.default_rng(0), 2, "shear")
