"""Singular integrals over the unit sphere of E x E and related closed forms.

The central object is

    I_beta(m) = integral over S^(2d-1) of m(sigma, tau) |sigma|^b3 |tau|^b2 |sigma - tau|^b1

for a monomial m in the 2d coordinates (sigma first).  Two methods are
offered.  ``adaptive`` reduces the integral to one angle and a Gauss
hypergeometric function and integrates that with mpmath; it handles the
monomials 1, sigma_i sigma_j, tau_i tau_j and sigma_i tau_j.  ``monte_carlo``
is a stratified, importance-sampled estimator that handles any monomial.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy import integrate, special

METHODS = ("adaptive", "monte_carlo", "radial")
CHUNK = 1 << 15


class NotConvergent(ValueError):
    """The requested integral diverges at these parameters."""


class NotOnCriticalPlane(ValueError):
    """beta does not lie on the required plane sum(beta) = -2d - 2k."""


@dataclass(frozen=True)
class QuadReport:
    estimate: float
    error_estimate: float
    evaluations: int
    seed: int
    method: str

    def to_dict(self) -> dict:
        return asdict(self)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^(n-1) in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def _check_beta(beta: Sequence[float], d: int) -> Tuple[float, float, float]:
    b = tuple(float(x) for x in beta)
    if len(b) != 3:
        raise ValueError("beta must have three entries")
    if any(x <= -d for x in b):
        raise NotConvergent(f"integral diverges unless every beta_j > -d (beta={b}, d={d})")
    return b


def _classify(monomial: Sequence[int], d: int) -> Optional[str]:
    """Reduce a monomial of degree <= 2 to one of the radial kinds, or 'zero'."""
    m = sorted(int(i) for i in monomial)
    if any(not 1 <= i <= 2 * d for i in m):
        raise ValueError(f"monomial indices must lie in 1..{2 * d}")
    if not m:
        return "one"
    if len(m) != 2:
        return None
    i, j = m
    if i == j:
        return "yy" if i <= d else "zz"
    if i <= d < j and j - d == i:
        return "yz"
    return "zero"


# ---------------------------------------------------------------------------
# adaptive: one angle plus a hypergeometric function
#
# Write sigma = cos(t) u, tau = sin(t) v with u, v on S^(d-1).  Averaging
# |sigma - tau|^b1 over the relative angle of u and v gives a 2F1 in
# w = sin(2t)^2, and the remaining t-integral is one-dimensional.


def _f1mw(a, b, c, w):
    """2F1(a, b; c; 1 - w), analytically continued around w = 0."""
    s = c - a - b
    if w > 0.5:
        return mpmath.hyp2f1(a, b, c, 1 - w)
    if mpmath.isint(s):
        # log singularity at w = 0: carry enough bits that 1 - w is not rounded to 1
        with mpmath.extraprec(int(-mpmath.log(w, 2)) + 20):
            return +mpmath.hyp2f1(a, b, c, 1 - w)
    g, rg = mpmath.gamma, mpmath.rgamma
    return g(c) * (g(s) * rg(c - a) * rg(c - b) * mpmath.hyp2f1(a, b, 1 - s, w)
                   + w ** s * g(-s) * rg(a) * rg(b) * mpmath.hyp2f1(c - a, c - b, 1 + s, w))


def _adaptive(beta, d: int, kind: str, dps: int) -> Tuple[float, float, int]:
    calls = [0]
    with mpmath.workdps(dps):
        b1, b2, b3 = (mpmath.mpf(x) for x in beta)
        half = mpmath.mpf(1) / 2
        a, b, c = -b1 / 4, half - b1 / 4, mpmath.mpf(d) / 2
        a2, bb2 = -(b1 + 2) / 4, half - (b1 + 2) / 4
        quarter = mpmath.pi / 4

        def f(u, side):
            calls[0] += 1
            if u == 0 or u >= quarter:
                return mpmath.mpf(0)
            th = quarter + side * u
            w = mpmath.sin(2 * u) ** 2
            ct, st = mpmath.cos(th), mpmath.sin(th)
            if ct <= 0 or st <= 0:
                # rounding at the endpoint theta = pi/2
                return mpmath.mpf(0)
            base = ct ** (b3 + d - 1) * st ** (b2 + d - 1)
            if kind == "one":
                return base * _f1mw(a, b, c, w)
            if kind == "yy":
                return base * ct ** 2 / d * _f1mw(a, b, c, w)
            if kind == "zz":
                return base * st ** 2 / d * _f1mw(a, b, c, w)
            x = mpmath.sqrt(1 - w)  # sin(2 theta) >= 0 on both halves
            return base * ct * st / d * x * bb2 / c * _f1mw(a2 + 1, bb2 + 1, c + 1, w)

        v1, e1 = mpmath.quad(lambda u: f(u, -1), [0, quarter], error=True)
        v2, e2 = mpmath.quad(lambda u: f(u, 1), [0, quarter], error=True)
        scale = mpmath.mpf(sphere_area(d)) ** 2
        return float(scale * (v1 + v2)), float(scale * (abs(e1) + abs(e2))), calls[0]


# ---------------------------------------------------------------------------
# Monte Carlo: a defensive mixture of uniform sampling and one component per
# singular set.  Each component puts |x|^beta_j density on its singular
# variable, so the weight f / q is bounded and the variance finite.


def _uniform_sphere(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    x = rng.standard_normal((n, m))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


# Radii below this are floored.  Cancellation in sigma - tau can round a tiny
# radius to 0; f and q share the same power of it, so the ratio is unaffected.
_FLOOR = 1e-60


def _radii(x: np.ndarray, d: int):
    s, t = x[:, :d], x[:, d:]
    return tuple(np.maximum(np.linalg.norm(v, axis=1), _FLOOR) for v in (s - t, t, s))


class _Mixture:
    def __init__(self, beta, d: int):
        self.d = d
        self.beta = beta
        area = sphere_area(2 * d)
        half = d / 2
        # component 0 is uniform; j = 1, 2, 3 concentrate on |sigma - tau|, |tau|, |sigma|
        self.comps = [0] + [j for j in (1, 2, 3) if beta[j - 1] < 0]
        self.weights = np.full(len(self.comps), 1.0 / len(self.comps))
        self.norm = {0: area}
        for j in self.comps[1:]:
            bj = beta[j - 1]
            self.norm[j] = area * special.beta((bj + d) / 2, half) / special.beta(half, half)

    def sample(self, comp: int, rng: np.random.Generator, n: int) -> np.ndarray:
        d = self.d
        if comp == 0:
            return _uniform_sphere(rng, n, 2 * d)
        bj = self.beta[comp - 1]
        c = rng.beta((bj + d) / 2, d / 2, size=n)[:, None]
        u, v = _uniform_sphere(rng, n, d), _uniform_sphere(rng, n, d)
        p, q = np.sqrt(c) * u, np.sqrt(1 - c) * v
        if comp == 3:
            return np.concatenate([p, q], axis=1)
        if comp == 2:
            return np.concatenate([q, p], axis=1)
        return np.concatenate([p + q, q - p], axis=1) / math.sqrt(2)

    def density(self, x: np.ndarray) -> np.ndarray:
        r1, r2, r3 = _radii(x, self.d)
        radial = {1: r1 / math.sqrt(2), 2: r2, 3: r3}
        out = np.zeros(len(x))
        for w, j in zip(self.weights, self.comps):
            dens = 1.0 if j == 0 else radial[j] ** self.beta[j - 1]
            out += w * dens / self.norm[j]
        return out


def _integrand(x: np.ndarray, beta, d: int) -> np.ndarray:
    b1, b2, b3 = beta
    r1, r2, r3 = _radii(x, d)
    return r3 ** b3 * r2 ** b2 * r1 ** b1


def _chunk_sums(mix: _Mixture, comp: int, chunk: int, n: int, seed: int, beta, d: int,
                monomials: Sequence[Tuple[int, ...]]) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, comp, chunk]))
    x = mix.sample(comp, rng, n)
    w = _integrand(x, beta, d) / mix.density(x)
    vals = np.empty((len(monomials), n))
    for r, mono in enumerate(monomials):
        v = w.copy()
        for i in mono:
            v *= x[:, i - 1]
        vals[r] = v
    return np.stack([vals.sum(axis=1), (vals ** 2).sum(axis=1)], axis=1)


def _monte_carlo(beta, d: int, monomials, budget: int, seed: int, workers: int = 1):
    mix = _Mixture(beta, d)
    jobs = []
    for ci, comp in enumerate(mix.comps):
        n_c = int(budget * mix.weights[ci])
        full, rest = divmod(n_c, CHUNK)
        sizes = [CHUNK] * full + ([rest] if rest else [])
        jobs.extend((ci, comp, k, size) for k, size in enumerate(sizes))

    def run(job):
        _, comp, k, size = job
        return _chunk_sums(mix, comp, k, size, seed, beta, d, monomials)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            partial = list(pool.map(run, jobs))
    else:
        partial = [run(j) for j in jobs]

    # reduce in job order so the result is independent of the worker count
    n_total = sum(j[3] for j in jobs)
    est = np.zeros(len(monomials))
    var = np.zeros(len(monomials))
    for ci in range(len(mix.comps)):
        acc = np.zeros((len(monomials), 2))
        n_c = 0
        for job, part in zip(jobs, partial):
            if job[0] == ci:
                acc += part
                n_c += job[3]
        if n_c == 0:
            continue
        mean = acc[:, 0] / n_c
        est += acc[:, 0]
        var += n_c * np.maximum(acc[:, 1] / n_c - mean ** 2, 0.0)
    return est / n_total, np.sqrt(var) / n_total, n_total


def sphere_quad_many(beta: Sequence[float], d: int, monomials: Sequence[Sequence[int]], budget: int = 1 << 20,
                     seed: int = 0, method: str = "monte_carlo", workers: int = 1,
                     dps: int = 20) -> List[QuadReport]:
    """Estimates for several monomials; Monte Carlo estimates share one sample."""
    beta = _check_beta(beta, d)
    monomials = [tuple(int(i) for i in m) for m in monomials]
    for m in monomials:
        _classify(m, d)  # validates indices
    if method == "monte_carlo":
        est, err, n = _monte_carlo(beta, d, monomials, int(budget), int(seed), workers)
        return [QuadReport(float(e), float(s), n, int(seed), method) for e, s in zip(est, err)]
    if method == "adaptive":
        out = []
        for m in monomials:
            kind = _classify(m, d)
            if kind is None:
                raise ValueError("adaptive quadrature supports monomials of degree 0 or 2")
            if kind == "zero":
                # odd under a reflection of one coordinate
                out.append(QuadReport(0.0, 0.0, 0, int(seed), method))
                continue
            v, e, n = _adaptive(beta, d, kind, dps)
            out.append(QuadReport(v, e, n, int(seed), method))
        return out
    raise ValueError(f"unknown method {method!r}")


def sphere_quad(beta: Sequence[float], d: int, monomial: Sequence[int] = (), budget: int = 1 << 20,
                seed: int = 0, method: str = "monte_carlo", workers: int = 1) -> QuadReport:
    """Estimate I_beta(monomial); the empty monomial gives I_beta(1)."""
    return sphere_quad_many(beta, d, [monomial], budget, seed, method, workers)[0]


# ---------------------------------------------------------------------------
# closed forms


def _mp(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def c0_closed_form(beta0: Sequence, d: int) -> float:
    """pi^d / (2 sqrt 2)^(3d) * Gamma(2d)/Gamma(3d/2) * prod_j Gamma((b_j+d)/2)/Gamma((-b_j-d)/2)."""
    b = [Fraction(x) if isinstance(x, (int, Fraction, str)) else x for x in beta0]
    if abs(float(sum(b)) + 2 * d) > 1e-12:
        raise NotOnCriticalPlane(f"sum(beta) = {float(sum(b))} but the plane requires {-2 * d}")
    with mpmath.workdps(30):
        r = mpmath.pi ** d / (2 * mpmath.sqrt(2)) ** (3 * d) * mpmath.gamma(2 * d) / mpmath.gamma(mpmath.mpf(3 * d) / 2)
        for bj in b:
            bj = _mp(bj)
            r *= mpmath.gamma((bj + d) / 2) * mpmath.rgamma((-bj - d) / 2)
        return float(r)


def radial_integral(d: int, power: float | None = None) -> Tuple[QuadReport, float]:
    """Integral over R^d of (1+|x|^2)^(-power) by radial quadrature, and the closed form.

    The default power 2d is the one met on the plane sum(beta) = -2d, where the
    closed form is pi^(d/2) Gamma(3d/2) / Gamma(2d).
    """
    p = 2 * d if power is None else float(power)
    if p <= d / 2:
        raise NotConvergent("the integral diverges unless power > d/2")
    val, err, info = integrate.quad(lambda r: r ** (d - 1) * (1 + r * r) ** (-p), 0, np.inf,
                                    epsabs=1e-15, epsrel=1e-13, full_output=True)[:3]
    area = sphere_area(d)
    exact = math.pi ** (d / 2) * math.gamma(p - d / 2) / math.gamma(p)
    return QuadReport(area * val, area * err, int(info["neval"]), 0, "radial"), exact


# ---------------------------------------------------------------------------
# k = 1 residue coefficients


@dataclass
class ResidueRatioReport:
    beta: Tuple[float, float, float]
    d: int
    lam: float
    mu: float
    estimates: Dict[str, QuadReport]
    triple: Tuple[float, float, float]
    target: Tuple[float, float, float]
    max_ratio_deviation: float
    isotropy_z: Dict[str, float]
    isotropic: bool
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.isotropic and self.max_ratio_deviation <= self.tolerance


def d1_coefficient_triple(lam: float, mu: float, d: int, convention: str = "display") -> Tuple[float, float, float]:
    """(Lap_y, R, Lap_z) coefficients of D^(1) at numeric (lam, mu, d)."""
    from ..operators import build_OR_Dk
    from ..words import Gen

    words = build_OR_Dk(1, convention).words
    vals = {"lam": lam, "mu": mu, "d": d}
    return tuple(words[(g,)].evaluate(vals) if (g,) in words else 0.0
                 for g in (Gen.LAP_Y, Gen.MIXED_R, Gen.LAP_Z))


def residue_ratio_check_k1(beta0: Sequence = (Fraction(-8, 3),) * 3, d: int = 3, budget: int = 1 << 22,
                           seed: int = 20240917, tolerance: float = 0.03, sigmas: float = 3.0,
                           convention: str = "display", workers: int = 1) -> ResidueRatioReport:
    """Monte Carlo a_ij for k = 1 against the D^(1) coefficients at lam = beta_to_lambda(beta0).

    a_ij is estimated as I_beta0(rho_i rho_j).  The diagonal blocks give A and
    B, the matching cross pairs (sigma_i, tau_i) give C, and the triple
    (A, 2C, B) is compared with D^(1) up to one overall constant.
    Off-diagonal entries and differences of diagonal entries must vanish
    within ``sigmas`` standard errors.
    """
    b = [Fraction(x) if isinstance(x, (int, Fraction, str)) else x for x in beta0]
    if abs(float(sum(b)) + 2 * d + 2) > 1e-12:
        raise NotOnCriticalPlane(f"sum(beta) = {float(sum(b))} but the k=1 plane requires {-2 * d - 2}")
    beta = tuple(float(x) for x in b)
    _check_beta(beta, d)
    rho = d / 2
    lam = (beta[0] + beta[2]) / 2 + rho
    mu = (beta[0] + beta[1]) / 2 + rho

    names: Dict[str, Tuple[int, int]] = {}
    for i in range(1, d + 1):
        names[f"y{i}y{i}"] = (i, i)
        names[f"z{i}z{i}"] = (d + i, d + i)
        names[f"y{i}z{i}"] = (i, d + i)
    names["y1y2"] = (1, 2)
    names["z1z2"] = (d + 1, d + 2)
    names["y1z2"] = (1, d + 2)
    names["y2z1"] = (2, d + 1)
    reps = sphere_quad_many(beta, d, list(names.values()), budget, seed, "monte_carlo", workers)
    est = dict(zip(names, reps))

    def mean(keys):
        return float(np.mean([est[k].estimate for k in keys]))

    A = mean([f"y{i}y{i}" for i in range(1, d + 1)])
    B = mean([f"z{i}z{i}" for i in range(1, d + 1)])
    C = mean([f"y{i}z{i}" for i in range(1, d + 1)])
    triple = (A, 2 * C, B)
    target = d1_coefficient_triple(lam, mu, d, convention)
    ratios = np.array(triple) / np.array(target)
    const = float(np.mean(ratios))
    dev = float(np.max(np.abs(ratios / const - 1)))

    z = {k: abs(est[k].estimate) / est[k].error_estimate for k in ("y1y2", "z1z2", "y1z2", "y2z1")}
    # equal diagonal entries: the difference of two estimates from one sample
    # is bounded here by the sum of their standard errors
    for blk in ("y", "z"):
        a, c = est[f"{blk}1{blk}1"], est[f"{blk}2{blk}2"]
        z[f"{blk}1{blk}1-{blk}2{blk}2"] = abs(a.estimate - c.estimate) / (a.error_estimate + c.error_estimate)
    isotropic = all(v <= sigmas for v in z.values())
    return ResidueRatioReport(beta, d, lam, mu, est, triple, target, dev, z, isotropic, tolerance)
