"""Fourier multiplier of the Knapp-Stein operator on a Gaussian.

I_nu G(x) = integral of |x - y|^(nu - d) exp(-|y|^2) dy is radial.  Averaging
|x - y|^(nu - d) over the direction of y gives a Gauss hypergeometric
function, so H(rho) = I_nu G at |x| = rho is a one-dimensional integral.
H decays only like rho^(nu - d), so its Hankel transform is computed by
subtracting a model sum_j m_j (1 + rho^2)^(-(s + j)) that matches the first
terms of the large-rho expansion.  The model transforms in closed form
(Bessel K) and the remainder decays fast enough for Gauss-Legendre panels.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from ..operators import knapp_stein_multiplier
from .quadrature import NotConvergent, sphere_area

MODEL_TERMS = 5
CUTOFF = 40.0
PANELS = 120
NODES = 20


@dataclass
class KnappSteinReport:
    nu: float
    d: int
    multiplier: float
    xi: Tuple[float, ...]
    computed: Tuple[float, ...]
    target: Tuple[float, ...]
    relative_errors: Tuple[float, ...]
    tolerance: float

    @property
    def max_relative_error(self) -> float:
        return max(self.relative_errors)

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def _H(rho: float, nu: float, d: int) -> float:
    """I_nu G at radius rho."""
    a, b, c = (d - nu) / 2, (2 - nu) / 2, d / 2
    area = sphere_area(d)

    def f(r):
        M, m = max(rho, r), min(rho, r)
        return r ** (d - 1) * math.exp(-r * r) * area * M ** (nu - d) * special.hyp2f1(a, b, c, (m / M) ** 2)

    opts = dict(limit=200, epsabs=1e-14, epsrel=1e-12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        inner = integrate.quad(f, 0, rho, **opts)[0] if rho > 0 else 0.0
        outer = integrate.quad(f, rho, rho + 12, **opts)[0]
    return inner + outer


def _binom(x: float, n: int) -> float:
    """Generalized binomial coefficient; exact at negative integer x."""
    return math.prod(x - i for i in range(n)) / math.factorial(n)


def _model(nu: float, d: int, terms: int) -> Tuple[float, np.ndarray]:
    """Exponent s and weights m_j with H - sum m_j (1+rho^2)^(-(s+j)) = O(rho^(nu-d-2 terms))."""
    s = (d - nu) / 2
    a, b, c = (d - nu) / 2, (2 - nu) / 2, d / 2
    area = sphere_area(d)
    # H(rho) ~ sum_n h_n rho^(nu - d - 2n)
    h = [area * special.poch(a, n) * special.poch(b, n) / (special.poch(c, n) * math.factorial(n))
         * special.gamma(n + d / 2) / 2 for n in range(terms)]
    m: list = []
    for n in range(terms):
        m.append(h[n] - sum(m[j] * _binom(-(s + j), n - j) for j in range(n)))
    return s, np.array(m)


def _model_transform(s: float, k: float, d: int) -> float:
    """Fourier transform of (1 + |x|^2)^(-s) on R^d at |xi| = k."""
    return (2 * math.pi) ** (d / 2) * 2 ** (1 - s) * k ** (s - d / 2) * special.kv(d / 2 - s, k) / special.gamma(s)


def knapp_stein_check(nu: float, d: int = 2, xi: Sequence[float] = (0.5, 1.0, 2.0),
                      tolerance: float = 1e-4) -> KnappSteinReport:
    """Compare the transform of I_nu G with c(nu) |xi|^(-nu) G^(xi), G = exp(-|x|^2)."""
    nu = float(nu)
    if not 0 < nu < d:
        raise NotConvergent(f"the Knapp-Stein integral needs 0 < nu < d (nu={nu}, d={d})")
    if any(k <= 0 for k in xi):
        raise ValueError("xi samples must be positive")
    s, m = _model(nu, d, MODEL_TERMS)
    xg, wg = np.polynomial.legendre.leggauss(NODES)
    edges = np.linspace(0.0, CUTOFF, PANELS + 1)
    half = (edges[1:] - edges[:-1])[:, None] / 2
    nodes = ((edges[:-1] + edges[1:])[:, None] / 2 + half * xg).ravel()
    weights = (half * wg).ravel()
    Hv = np.array([_H(r, nu, d) for r in nodes])
    model = sum(m[j] * (1 + nodes ** 2) ** (-(s + j)) for j in range(MODEL_TERMS))
    rem = Hv - model

    c_nu = float(knapp_stein_multiplier(nu, d))
    computed, target, errs = [], [], []
    for k in xi:
        # radial Fourier transform: (2 pi)^(d/2) k^(1-d/2) int f(r) J_(d/2-1)(k r) r^(d/2) dr
        val = (2 * math.pi) ** (d / 2) * k ** (1 - d / 2) * float(np.sum(weights * rem * special.jv(d / 2 - 1, k * nodes)
                                                             * nodes ** (d / 2)))
        val += sum(m[j] * _model_transform(s + j, k, d) for j in range(MODEL_TERMS))
        tgt = c_nu * k ** (-nu) * math.pi ** (d / 2) * math.exp(-k * k / 4)
        computed.append(val)
        target.append(tgt)
        errs.append(abs(val / tgt - 1))
    return KnappSteinReport(nu, d, c_nu, tuple(float(k) for k in xi), tuple(computed), tuple(target),
                            tuple(errs), tolerance)


def multiplier_table(nus: Sequence[float], d: int) -> Dict[float, float]:
    return {nu: float(knapp_stein_multiplier(nu, d)) for nu in nus}
