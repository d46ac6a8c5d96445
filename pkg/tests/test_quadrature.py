from __future__ import annotations

import math
from fractions import Fraction

import pytest

from conformal_bidiff.numerics.quadrature import (
    NotConvergent,
    NotOnCriticalPlane,
    c0_closed_form,
    d1_coefficient_triple,
    radial_integral,
    residue_ratio_check_k1,
    sphere_area,
    sphere_quad,
    sphere_quad_many,
)

BUDGET = 1 << 16


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("method", ["adaptive", "monte_carlo"])
def test_sphere_volume(d, method):
    rep = sphere_quad((0, 0, 0), d, budget=BUDGET, method=method)
    assert rep.estimate == pytest.approx(2 * math.pi ** d / math.gamma(d), rel=1e-6)


def test_swap_symmetry():
    a = sphere_quad((-1.0, -0.5, 0.7), 2, budget=BUDGET, seed=4)
    b = sphere_quad((-1.0, 0.7, -0.5), 2, budget=BUDGET, seed=9)
    assert abs(a.estimate - b.estimate) <= 3 * math.hypot(a.error_estimate, b.error_estimate)
    ea = sphere_quad((-1.0, -0.5, 0.7), 2, method="adaptive")
    eb = sphere_quad((-1.0, 0.7, -0.5), 2, method="adaptive")
    assert ea.estimate == pytest.approx(eb.estimate, rel=1e-10)


def test_determinism_across_workers():
    kw = dict(beta=(-1.2, -0.4, 0.3), d=2, monomials=[(), (1, 1), (1, 3)], budget=BUDGET, seed=77)
    one = sphere_quad_many(workers=1, **kw)
    three = sphere_quad_many(workers=3, **kw)
    assert [r.to_dict() for r in one] == [r.to_dict() for r in three]
    assert one == sphere_quad_many(workers=1, **kw)


def test_not_convergent():
    with pytest.raises(NotConvergent):
        sphere_quad((-2.0, 0.0, 0.0), 2)
    with pytest.raises(ValueError):
        sphere_quad((0, 0, 0), 2, method="simpson")


@pytest.mark.parametrize("beta", [(-1.9, -1.9, -1.9), (-1.5, 0.3, -1.0), (2.0, -1.2, 0.5)])
def test_positivity(beta):
    assert sphere_quad(beta, 2, budget=BUDGET).estimate > 0
    assert sphere_quad(beta, 2, method="adaptive").estimate > 0


# (-1, ., .) at d = 2 and (-2, ., .) at d = 3 hit the logarithmic case of the angular 2F1
@pytest.mark.parametrize("beta,d", [((-1.3, -0.6, -0.9), 2), ((-1.0, -1.5, -1.5), 2), ((-2.0, -2.0, -2.0), 3)])
def test_monte_carlo_agrees_with_adaptive(beta, d):
    for mono in [(), (1, 1), (1, d + 1), (d + 1, d + 2)]:
        mc = sphere_quad(beta, d, mono, budget=1 << 18, seed=5)
        ad = sphere_quad(beta, d, mono, method="adaptive")
        assert math.isfinite(ad.estimate)
        assert abs(mc.estimate - ad.estimate) <= 4 * mc.error_estimate + 1e-12


def test_cross_block_closed_form():
    # |sigma - tau|^2 = 1 - 2 sigma.tau, so the integral is -2 |S^3| E[x1^2 x3^2] = -pi^2 / 6
    rep = sphere_quad((2.0, 0.0, 0.0), 2, (1, 3), method="adaptive")
    assert rep.estimate == pytest.approx(-math.pi ** 2 / 6, rel=1e-12)


def test_radial_integral_d2():
    rep, exact = radial_integral(2)
    assert exact == pytest.approx(math.pi / 3, rel=1e-15)
    assert rep.estimate == pytest.approx(math.pi / 3, rel=1e-12)


def test_closed_form_plane():
    with pytest.raises(NotOnCriticalPlane):
        c0_closed_form((-1, -1, -1), 2)
    val = c0_closed_form((Fraction(-4, 3),) * 3, 2)
    assert abs(val) == pytest.approx(1.659e-2, rel=1e-3)


def test_k1_plane_and_triple():
    with pytest.raises(NotOnCriticalPlane):
        residue_ratio_check_k1((-2, -2, -2), 3, budget=BUDGET)
    lam = mu = -7 / 6
    assert d1_coefficient_triple(lam, mu, 3) == pytest.approx((2.0, 2.0, 2.0), rel=1e-14)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi ** 2)
