"""End-to-end acceptance checks, one test per criterion at its stated tolerance."""
from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conformal_bidiff.coordinate_oracle import cross_validate, formal_adjoint, symbol, to_coord_operator
from conformal_bidiff.exact_ring import ParamRat, var
from conformal_bidiff.numerics.covariance import covariance_sweep, duality_residual
from conformal_bidiff.numerics.group import (
    SingularPoint,
    cocycle_residual,
    distance_identity_residual,
    random_element,
)
from conformal_bidiff.numerics.knapp_stein import knapp_stein_check
from conformal_bidiff.numerics.quadrature import (
    c0_closed_form,
    radial_integral,
    residue_ratio_check_k1,
    sphere_quad,
)
from conformal_bidiff.numerics.testfunc import random_test_function
from conformal_bidiff.operators import (
    IdentityFailed,
    build_B,
    build_C,
    build_E,
    build_F,
    build_F_k,
    c_in_lambda,
    compare_symbols,
    knapp_stein_multiplier,
    or_symbol,
    recursion_consistency,
    verify_bernstein_sato,
)

pytestmark = pytest.mark.acceptance


def test_criterion_1_bernstein_sato(verdict):
    t0 = time.perf_counter()
    try:
        rep = verify_bernstein_sato()
        zero = rep.residual.is_zero()
    except IdentityFailed:
        zero = False
    secs = time.perf_counter() - t0
    ok = zero and secs <= 10
    verdict(1, ok, f"B l_(beta+2_1) - b l_beta exact zero={zero}, {secs:.2f}s (budget 10s)")
    assert ok


def test_criterion_2_oracle_equivalence(verdict):
    rep = cross_validate(200, (2, 3, 4), seed=0)
    ok = rep.passed and rep.seconds <= 60
    verdict(2, ok, f"{rep.cases} cases, {len(rep.mismatches)} mismatches, {rep.seconds:.1f}s (budget 60s)")
    assert ok


def test_criterion_3_transpose_and_substitution(verdict):
    results = {}
    for d in (2, 3):
        results[f"E^t=F d={d}"] = formal_adjoint(build_E(), d) == to_coord_operator(build_F(), d)
        results[f"B^t=C d={d}"] = formal_adjoint(build_B(), d) == to_coord_operator(build_C(), d)
    C, F = c_in_lambda()
    results["C(beta(lam))=F"] = C == F
    ok = all(results.values())
    verdict(3, ok, ", ".join(f"{k}:{v}" for k, v in results.items()))
    assert ok


def test_criterion_4_symbol_proportionality(verdict):
    t0 = time.perf_counter()
    lam, mu = var("lam"), var("mu")
    cells = []
    ok = True
    for k in (1, 2, 3):
        for d in (2, 3):
            cmp = compare_symbols(k, d, "display")
            alt = compare_symbols(k, d, "formula")
            ok &= cmp.proportional
            cells.append(f"k={k} d={d} display:{cmp.proportional} formula:{alt.proportional}")
            if k == 1:
                exact = cmp.ratio == ParamRat(-4 * (lam + 1) * (mu + 1))
                ok &= exact
                cells.append(f"k=1 d={d} ratio -4(lam+1)(mu+1):{exact}")
    secs = time.perf_counter() - t0
    ok &= secs <= 300
    verdict(4, ok, "; ".join(cells) + f"; {secs:.1f}s (budget 300s)")
    assert ok


def test_criterion_5_covariance(verdict):
    t0 = time.perf_counter()
    syms = {
        "F1": (symbol(build_F_k(1), 2), 1),
        "F2": (symbol(build_F_k(2), 2), 2),
        "D1-formula": (or_symbol(1, "formula"), 1),
        "D1-display": (or_symbol(1, "display"), 1),
    }
    rows = covariance_sweep(syms, d=2, points=20, seed=0)
    worst = {}
    for r in rows:
        worst[r.label] = max(worst.get(r.label, 0.0), r.residual)
    secs = time.perf_counter() - t0
    passing = [c for c in ("formula", "display") if worst[f"D1-{c}"] <= 1e-6]
    ok = worst["F1"] <= 1e-6 and worst["F2"] <= 1e-6 and len(passing) == 1 and secs <= 120
    verdict(5, ok, f"max residual F1={worst['F1']:.2e} F2={worst['F2']:.2e}; "
                   f"D1 formula={worst['D1-formula']:.2e} display={worst['D1-display']:.2e} "
                   f"covariant={passing}; {secs:.1f}s (budget 120s)")
    assert ok


def test_criterion_6_c0_magnitude(verdict):
    t0 = time.perf_counter()
    beta = (Fraction(-4, 3),) * 3
    closed = c0_closed_form(beta, 2)
    ad = sphere_quad([float(b) for b in beta], 2, method="adaptive")
    mc = sphere_quad([float(b) for b in beta], 2, budget=1 << 20, seed=0)
    rel = abs(abs(ad.estimate) - abs(closed)) / abs(closed)
    secs = time.perf_counter() - t0
    ok = rel <= 0.005 and ad.estimate > 0 and secs <= 300
    sign = "closed form negative, quadrature positive" if closed < 0 < ad.estimate else "signs agree"
    verdict(6, ok, f"I(1) adaptive={ad.estimate:.6g} (MC {mc.estimate:.6g} +- {mc.error_estimate:.2g}), "
                   f"closed form={closed:.6g}, relative magnitude gap={rel:.3g} (tol 0.005); "
                   f"sign: {sign}; {secs:.1f}s")
    assert ok


def test_criterion_7_k1_residue_ratios(verdict):
    t0 = time.perf_counter()
    rep = residue_ratio_check_k1()
    secs = time.perf_counter() - t0
    ok = rep.passed and secs <= 600
    zmax = max(rep.isotropy_z.values())
    verdict(7, ok, f"triple={tuple(round(x, 6) for x in rep.triple)} target={rep.target}, "
                   f"max deviation={rep.max_ratio_deviation:.2e} (tol 0.03), max isotropy z={zmax:.2f} (tol 3); "
                   f"{secs:.1f}s (budget 600s)")
    assert ok


def test_criterion_8_knapp_stein(verdict):
    t0 = time.perf_counter()
    errs = {nu: knapp_stein_check(nu, 2, (0.5, 1.0, 2.0), 1e-4).max_relative_error for nu in (0.5, 1.0)}
    c1 = float(knapp_stein_multiplier(1, 2))
    secs = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-4 and abs(c1 - 2 * math.pi) <= 1e-14 and secs <= 120
    verdict(8, ok, f"max relative error nu=0.5: {errs[0.5]:.2e}, nu=1: {errs[1.0]:.2e} (tol 1e-4); "
                   f"c(1)={c1!r}; {secs:.1f}s (budget 120s)")
    assert ok


def test_criterion_9_closed_integrals(verdict):
    rep, _ = radial_integral(2)
    err_rad = abs(rep.estimate - math.pi / 3) / (math.pi / 3)
    vol = {}
    for d in (2, 3):
        exact = 2 * math.pi ** d / math.gamma(d)
        for method in ("adaptive", "monte_carlo"):
            est = sphere_quad((0, 0, 0), d, budget=1 << 16, method=method).estimate
            vol[(d, method)] = abs(est - exact) / exact
    ok = err_rad <= 1e-8 and max(vol.values()) <= 1e-6
    verdict(9, ok, f"pi/3 relative error {err_rad:.1e} (tol 1e-8); sphere volume max relative error "
                   f"{max(vol.values()):.1e} (tol 1e-6)")
    assert ok


def _draw(rng, fn):
    while True:
        try:
            return fn(rng)
        except SingularPoint:
            continue


def test_criterion_10_group_identities(verdict):
    rng = np.random.default_rng(20240917)
    coc = dist = 0.0
    for i in range(500):
        d = (2, 3, 4)[i % 3]
        coc = max(coc, float(_draw(rng, lambda r: cocycle_residual(
            random_element(r, d, 4), random_element(r, d, 4), r.uniform(-2, 2, d)))))
        dist = max(dist, float(_draw(rng, lambda r: distance_identity_residual(
            random_element(r, d, 4), r.uniform(-2, 2, d), r.uniform(-2, 2, d)))))
    dual = 0.0
    for _ in range(20):
        g = random_element(rng, 2, 4)
        lam = float(rng.uniform(-1, 1))
        phi, psi = random_test_function(rng, 2), random_test_function(rng, 2)
        dual = max(dual, duality_residual(g, lam, phi, psi)[0])
    ok = coc <= 1e-10 and dist <= 1e-10 and dual <= 1e-6
    verdict(10, ok, f"cocycle {coc:.1e}, distance {dist:.1e} (tol 1e-10, 500 cases); "
                    f"duality {dual:.1e} (tol 1e-6, 20 cases)")
    assert ok


def test_criterion_11_ck_recursion(verdict):
    t0 = time.perf_counter()
    try:
        ok = all(recursion_consistency(k) for k in range(6))
    except IdentityFailed:
        ok = False
    secs = time.perf_counter() - t0
    ok = ok and secs <= 1
    verdict(11, ok, f"c_(k+1)/c_k matches the recursion factor for k=0..5; {secs:.3f}s (budget 1s)")
    assert ok
