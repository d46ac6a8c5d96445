"""Named operators, parameter maps and constants.

Every operator is an :class:`~conformal_bidiff.words.OperatorExpr` over the
six invariant generators, with polynomial or rational coefficients in the
parameters.  Composition is always "rightmost factor acts first".
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Dict, Optional, Tuple

import mpmath

from .coordinate_oracle import SymbolPoly, symbol
from .exact_ring import Coercible, ParamPoly, ParamRat, pochhammer, rho, var
from .invariant_calculus import InvariantKernel, apply_word, kernel
from .words import Gen, OperatorChain, OperatorExpr

CONVENTIONS = ("formula", "display")


class IdentityFailed(AssertionError):
    """An exact identity did not reduce to zero; ``residual`` holds what is left."""

    def __init__(self, message: str, residual=None):
        super().__init__(message)
        self.residual = residual


class PoleAtParameter(ValueError):
    pass


def _p(x: Coercible | str | None, default: str) -> ParamPoly:
    if x is None:
        return var(default)
    if isinstance(x, str):
        return var(x)
    return ParamPoly.coerce(x)


def _g(*gens: Gen) -> Tuple[Gen, ...]:
    return tuple(gens)


# ---------------------------------------------------------------------------
# Bernstein-Sato operator


def build_B(b1=None, b2=None, b3=None) -> OperatorExpr:
    """B_beta with symbolic (default) or specialized exponents."""
    b1, b2, b3 = _p(b1, "b1"), _p(b2, "b2"), _p(b3, "b3")
    d = var("d")
    u = b3 + b1 + d
    v = b2 + b1 + d
    return OperatorExpr({
        _g(Gen.MUL_R, Gen.LAP_Y, Gen.LAP_Z): 1,
        # sum (z_j - y_j) d/dy_j = -EulYZ, and symmetrically for z
        _g(Gen.EUL_YZ, Gen.LAP_Z): -2 * u,
        _g(Gen.EUL_ZY, Gen.LAP_Y): -2 * v,
        _g(Gen.LAP_Z): u * (b3 + b1 + 2),
        _g(Gen.LAP_Y): v * (b2 + b1 + 2),
        _g(Gen.MIXED_R): -2 * u * v,
    })


def b_poly(b1=None, b2=None, b3=None, d=None) -> ParamPoly:
    b1, b2, b3, d = _p(b1, "b1"), _p(b2, "b2"), _p(b3, "b3"), _p(d, "d")
    total = b1 + b2 + b3
    return (b1 + d) * (b1 + 2) * (total + 2 * d) * (total + d + 2)


@dataclass
class BSReport:
    passed: bool
    residual: InvariantKernel
    lhs_terms: int
    seconds: float


def bernstein_sato_residual(perturbation: Coercible = 0) -> InvariantKernel:
    """B_beta l_(beta+2_1) - (b(beta) + perturbation) l_beta as an exact kernel."""
    lhs = apply_word(build_B(), kernel(0, 0, 1))
    return lhs - kernel(0, 0, 0, b_poly() + ParamPoly.coerce(perturbation))


def verify_bernstein_sato(perturbation: Coercible = 0) -> BSReport:
    """Check the identity in symbolic (b1, b2, b3, d); raise IdentityFailed otherwise."""
    t0 = time.perf_counter()
    lhs = apply_word(build_B(), kernel(0, 0, 1))
    residual = lhs - kernel(0, 0, 0, b_poly() + ParamPoly.coerce(perturbation))
    report = BSReport(residual.is_zero(), residual, len(lhs.terms), time.perf_counter() - t0)
    if not report.passed:
        raise IdentityFailed("Bernstein-Sato identity does not reduce to zero", residual)
    return report


# ---------------------------------------------------------------------------
# E, F, C


def build_E(lam=None, mu=None) -> OperatorExpr:
    lam, mu = _p(lam, "lam"), _p(mu, "mu")
    d = var("d")
    return OperatorExpr({
        _g(Gen.MUL_R, Gen.LAP_Y, Gen.LAP_Z): 1,
        _g(Gen.EUL_ZY, Gen.LAP_Y): -4 * mu,
        _g(Gen.EUL_YZ, Gen.LAP_Z): -4 * lam,
        _g(Gen.LAP_Y): 2 * mu * (2 * mu + 2 - d),
        _g(Gen.LAP_Z): 2 * lam * (2 * lam + 2 - d),
        _g(Gen.MIXED_R): -8 * lam * mu,
    })


def build_F(lam=None, mu=None) -> OperatorExpr:
    lam, mu = _p(lam, "lam"), _p(mu, "mu")
    r = rho()
    return OperatorExpr({
        _g(Gen.MUL_R, Gen.LAP_Y, Gen.LAP_Z): 1,
        _g(Gen.EUL_ZY, Gen.LAP_Y): 4 * (mu + 1),
        _g(Gen.EUL_YZ, Gen.LAP_Z): 4 * (lam + 1),
        _g(Gen.LAP_Y): 4 * (mu + 1) * (mu + r),
        _g(Gen.LAP_Z): 4 * (lam + 1) * (lam + r),
        _g(Gen.MIXED_R): -8 * (lam + 1) * (mu + 1),
    })


def build_C(b1=None, b2=None, b3=None) -> OperatorExpr:
    b1, b2, b3 = _p(b1, "b1"), _p(b2, "b2"), _p(b3, "b3")
    d = var("d")
    p = b1 + b2 + d + 2
    q = b1 + b3 + d + 2
    return OperatorExpr({
        _g(Gen.MUL_R, Gen.LAP_Y, Gen.LAP_Z): 1,
        _g(Gen.EUL_ZY, Gen.LAP_Y): 2 * p,
        _g(Gen.EUL_YZ, Gen.LAP_Z): 2 * q,
        _g(Gen.LAP_Y): (b1 + b2 + 2 * d) * p,
        _g(Gen.MIXED_R): -2 * p * q,
        _g(Gen.LAP_Z): (b1 + b3 + 2 * d) * q,
    })


# ---------------------------------------------------------------------------
# parameter maps


@dataclass(frozen=True)
class Triple:
    first: ParamPoly
    second: ParamPoly
    third: ParamPoly

    def __iter__(self):
        return iter((self.first, self.second, self.third))

    def substitute(self, bindings) -> "Triple":
        return Triple(*(x.substitute(bindings) for x in self))


LambdaTriple = Triple
BetaTriple = Triple


def beta_to_lambda(beta=None) -> LambdaTriple:
    """lam_1 = (b2+b3)/2 + rho, lam_2 = (b1+b3)/2 + rho, lam_3 = (b1+b2)/2 + rho."""
    b1, b2, b3 = (var(n) for n in ("b1", "b2", "b3")) if beta is None else (ParamPoly.coerce(x) for x in beta)
    h, r = Fraction(1, 2), rho()
    return Triple((b2 + b3) * h + r, (b1 + b3) * h + r, (b1 + b2) * h + r)


def lambda_to_beta(lams) -> BetaTriple:
    """Inverse map: b1 = -l1 + l2 + l3 - rho and cyclically."""
    l1, l2, l3 = (ParamPoly.coerce(x) for x in lams)
    r = rho()
    return Triple(-l1 + l2 + l3 - r, l1 - l2 + l3 - r, l1 + l2 - l3 - r)


def c_in_lambda() -> Tuple[OperatorExpr, OperatorExpr]:
    """C_beta rewritten through (lam_2, lam_3) = (lam, mu), next to F_{lam,mu}.

    The parameter map gives b1 + b3 = 2 lam_2 - d and b1 + b2 = 2 lam_3 - d.
    Keeping b1 as the free coordinate (in place of lam_1), the substitution
    b2 = 2 mu - d - b1, b3 = 2 lam - d - b1 is exact, and b1 must cancel.
    """
    d = var("d")
    b1 = var("b1")
    lam, mu = var("lam"), var("mu")
    C = build_C(b1, 2 * mu - d - b1, 2 * lam - d - b1)
    return C, build_F(lam, mu)


# ---------------------------------------------------------------------------
# Ovsienko-Redou coefficients


def _c_rst_le(r: int, s: int, t: int, lam: ParamPoly, mu: ParamPoly) -> ParamRat:
    rh = rho()
    pref = ParamRat(Fraction((-1) ** (t - r) * comb(r + s + t, t), 2 ** r * factorial(r)))
    pref = pref * ParamRat(pochhammer(s + 1, r), pochhammer(lam + 1, r))
    total = ParamRat(0)
    for p in range(r + 1):
        num = pochhammer(lam + rh + r - s + p, t - p) * pochhammer(mu + rh + s + 2 * t, r - p)
        total = total + ParamRat(num * Fraction(factorial(r) * factorial(t), factorial(p)),
                                 pochhammer(mu + 1, t - p))
    return pref * total


def c_rst(r: int, s: int, t: int, lam=None, mu=None) -> ParamRat:
    """The coefficient of Lap_y^r R^s Lap_z^t from the closed double sum.

    For r > t the reflection c_rst(lam, mu) = c_tsr(mu, lam) is used.
    """
    if min(r, s, t) < 0:
        raise ValueError("indices must be natural numbers")
    lam, mu = _p(lam, "lam"), _p(mu, "mu")
    if r <= t:
        return _c_rst_le(r, s, t, lam, mu)
    return _c_rst_le(t, s, r, mu, lam)


def or_coefficient(r: int, s: int, t: int, convention: str = "display", lam=None, mu=None) -> ParamRat:
    """c_rst under a convention: ``formula`` is the double sum, ``display`` scales it by 2^s.

    At k = 1 the ``display`` convention has R-coefficient 2 and is the covariant one.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    c = c_rst(r, s, t, lam, mu)
    return c * (2 ** s) if convention == "display" else c


def build_OR_Dk(k: int, convention: str = "display", lam=None, mu=None) -> OperatorExpr:
    """sum_{r+s+t=k} c_rst Lap_y^r R^s Lap_z^t (to be restricted to the diagonal)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    words: Dict = {}
    for r in range(k + 1):
        for s in range(k - r + 1):
            t = k - r - s
            w = (Gen.LAP_Y,) * r + (Gen.MIXED_R,) * s + (Gen.LAP_Z,) * t
            words[w] = or_coefficient(r, s, t, convention, lam, mu)
    return OperatorExpr(words)


def or_symbol(k: int, convention: str = "display", lam=None, mu=None) -> SymbolPoly:
    """Symbol of D^(k) written directly: c_rst A^r B^s C^t (valid in every dimension)."""
    terms = {}
    for r in range(k + 1):
        for s in range(k - r + 1):
            terms[(r, s, k - r - s)] = or_coefficient(r, s, k - r - s, convention, lam, mu)
    return SymbolPoly(None, terms)


def build_F_k(k: int, lam=None, mu=None) -> OperatorChain:
    """F_{lam+k-1, mu+k-1} o ... o F_{lam, mu}, restricted to the diagonal."""
    if k < 0:
        raise ValueError("k must be >= 0")
    lam, mu = _p(lam, "lam"), _p(mu, "mu")
    factors = tuple(build_F(lam + j, mu + j) for j in reversed(range(k)))
    return OperatorChain(factors, diagonal=True)


def build_C_k(k: int, b1=None, b2=None, b3=None) -> OperatorChain:
    """C_{beta-2_1} o C_{beta-4_1} o ... o C_{beta-(2k)_1}."""
    if k < 0:
        raise ValueError("k must be >= 0")
    b1, b2, b3 = _p(b1, "b1"), _p(b2, "b2"), _p(b3, "b3")
    factors = tuple(build_C(b1 - 2 * j, b2, b3) for j in range(1, k + 1))
    return OperatorChain(factors, diagonal=True)


@dataclass
class SymbolComparison:
    k: int
    d: int
    convention: str
    symbol_F: SymbolPoly
    symbol_D: SymbolPoly
    ratio: Optional[ParamRat]

    @property
    def proportional(self) -> bool:
        return self.ratio is not None and self.ratio.num.variables() <= {"lam", "mu"} \
            and self.ratio.den.variables() <= {"lam", "mu"}


def compare_symbols(k: int, d: int, convention: str = "display") -> SymbolComparison:
    """Exact proportionality test between symbol(F^(k)) and symbol(D^(k)) at dimension d."""
    sF = symbol(build_F_k(k), d) if k else SymbolPoly(d, {(0, 0, 0): 1})
    sD = or_symbol(k, convention).substitute({"d": d})
    sD = SymbolPoly(d, sD.terms)
    return SymbolComparison(k, d, convention, sF, sD, sF.is_proportional(sD))


# ---------------------------------------------------------------------------
# residue constants


def c_k_over_c0(k: int, beta1_0=None) -> ParamRat:
    """(1/16^k)(1/k!)(1/(rho)_k)(1/(-b/2)_k)(1/(-b/2-rho+1)_k) with b = beta1_0."""
    if k < 0:
        raise ValueError("k must be >= 0")
    b = _p(beta1_0, "b1")
    h = Fraction(1, 2)
    den = pochhammer(rho(), k) * pochhammer(-b * h, k) * pochhammer(-b * h - rho() + 1, k)
    return ParamRat(Fraction(1, 16 ** k * factorial(k)), den)


def recursion_factor(k: int, beta1_0=None) -> ParamRat:
    """1/((2k+2)(2k+d)(b+2)(b+d)) evaluated at b = beta1_0 - 2k - 2."""
    b0 = _p(beta1_0, "b1")
    d = var("d")
    b = b0 - 2 * k - 2
    return ParamRat(1, (2 * k + 2) * (2 * k + d) * (b + 2) * (b + d))


def recursion_consistency(k: int) -> bool:
    """c_{k+1}/c_k equals the recursion factor, as an exact rational-function identity."""
    lhs = c_k_over_c0(k + 1) / c_k_over_c0(k)
    rhs = recursion_factor(k)
    if lhs != rhs:
        raise IdentityFailed(f"c_k recursion fails at k={k}", lhs - rhs)
    return True


# ---------------------------------------------------------------------------
# Gamma-function constants (mpmath, >= 30 digits)

DPS = 40


def _is_gamma_pole(x) -> bool:
    return x <= 0 and mpmath.isint(x)


def knapp_stein_multiplier(nu, d: int):
    """c(nu) = 2^nu pi^(d/2) Gamma(nu/2) / Gamma((d-nu)/2)."""
    with mpmath.workdps(DPS):
        nu = mpmath.mpf(nu) if not isinstance(nu, Fraction) else mpmath.mpf(nu.numerator) / nu.denominator
        if _is_gamma_pole(nu / 2):
            raise PoleAtParameter(f"Gamma(nu/2) has a pole at nu={nu}")
        return +(2 ** nu * mpmath.pi ** (mpmath.mpf(d) / 2) * mpmath.gamma(nu / 2) * mpmath.rgamma((d - nu) / 2))


def n_constant(lam, mu, d: int):
    """c(lam, mu) for N_{lam,mu} = c(lam, mu) F_{lam,mu}."""
    with mpmath.workdps(DPS):
        lam, mu = (mpmath.mpf(x.numerator) / x.denominator if isinstance(x, Fraction) else mpmath.mpf(x)
                   for x in (lam, mu))
        for x in (lam, -lam - 1, mu, -mu - 1):
            if _is_gamma_pole(x):
                raise PoleAtParameter(f"Gamma pole at argument {x}")
        r = mpmath.mpf(d) / 2
        num = mpmath.gamma(lam) * mpmath.gamma(-lam - 1) * mpmath.gamma(mu) * mpmath.gamma(-mu - 1)
        den_inv = (mpmath.rgamma(r - lam) * mpmath.rgamma(r + lam + 1)
                   * mpmath.rgamma(r - mu) * mpmath.rgamma(r + mu + 1))
        return +(mpmath.pi ** (2 * d) / 16 * num * den_inv)
