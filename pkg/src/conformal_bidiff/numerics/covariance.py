"""Numerical covariance, duality and adjoint-pairing checks.

The principal series acts by pi_lam(g) f(x) = kappa(g^-1, x)^(rho+lam) f(g^-1 x).
Covariance of a constant-coefficient bidifferential operator D means

    D o (pi_lam(g) x pi_mu(g)) = pi_nu(g) o D,   nu = lam + mu + rho + 2k.

The right side is exact (test functions differentiate in closed form); the
left side differentiates a transformed function and uses order-8 central
finite differences on a tensor-product stencil.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..coordinate_oracle import CoordOperator, SymbolPoly, evaluate_flat, symbol_monomials
from ..exact_ring import NPARAMS
from .group import SINGULAR_RADIUS, GroupElement, SingularPoint
from .testfunc import TestFunction, random_test_function

FD_ORDER = 8
EPS = np.finfo(float).eps


class StencilTooWide(ValueError):
    """A finite-difference stencil reaches into the singular locus."""


# ---------------------------------------------------------------------------
# group action with masking


def _path(g: GroupElement, x: np.ndarray, strict: bool = True):
    """(g x, kappa(g, x), ok-mask); with strict=False singular points are masked."""
    x = np.array(x, dtype=float)
    k = np.ones(x.shape[:-1])
    ok = np.ones(x.shape[:-1], dtype=bool)
    for p in g.prims:
        if type(p).__name__ == "Invert":
            n2 = np.sum(x * x, axis=-1)
            bad = np.sqrt(n2) < SINGULAR_RADIUS
            if strict and np.any(bad):
                raise SingularPoint("point too close to an inversion centre")
            ok &= ~bad
            n2 = np.where(bad, 1.0, n2)
            k = k / n2
            x = -x / n2[..., None]
        else:
            k = k * p.kappa(x)
            x = p.act(x)
    return x, k, ok


def pi_apply(g: GroupElement, lam: float, f: Callable, x, d: int | None = None, strict: bool = True):
    """pi_lam(g) f at the points x (shape (..., d))."""
    x = np.asarray(x, dtype=float)
    d = d or x.shape[-1]
    u, k, ok = _path(g.inverse(), x, strict)
    val = k ** (d / 2 + lam) * f(u)
    return np.where(ok, val, 0.0)


def pi_pair_apply(g: GroupElement, lam: float, mu: float, f: Callable, YZ, d: int, strict: bool = True):
    """(pi_lam(g) x pi_mu(g)) f at points YZ of shape (..., 2d)."""
    YZ = np.asarray(YZ, dtype=float)
    ginv = g.inverse()
    u, ku, oku = _path(ginv, YZ[..., :d], strict)
    v, kv, okv = _path(ginv, YZ[..., d:], strict)
    val = ku ** (d / 2 + lam) * kv ** (d / 2 + mu) * f(np.concatenate([u, v], axis=-1))
    return np.where(oku & okv, val, 0.0)


# ---------------------------------------------------------------------------
# finite differences


@lru_cache(maxsize=None)
def fd_weights(m: int, order: int = FD_ORDER) -> Tuple[Tuple[int, ...], Tuple[float, ...]]:
    """Central stencil offsets and weights for the m-th derivative (unit step).

    Weights solve the Vandermonde system sum_j w_j j^q = m! delta_qm exactly in
    rationals, so no rounding enters before the final float conversion.
    """
    if m == 0:
        return (0,), (1.0,)
    p = (m - 1) // 2 + order // 2
    offs = list(range(-p, p + 1))
    n = len(offs)
    A = [[Fraction(j) ** q for j in offs] for q in range(n)]
    b = [Fraction(0)] * n
    fact = 1
    for i in range(2, m + 1):
        fact *= i
    b[m] = Fraction(fact)
    # Gauss-Jordan over Q
    M = [row + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    w = [M[i][n] for i in range(n)]
    keep = [(o, float(x)) for o, x in zip(offs, w) if x != 0]
    return tuple(o for o, _ in keep), tuple(x for _, x in keep)


def fd_step(total_order: int, scale: float) -> float:
    """h = scale * eps^(1/(8+m)): balances O(h^8) truncation against eps/h^m rounding."""
    return scale * EPS ** (1.0 / (FD_ORDER + total_order))


def fd_derivative(func: Callable, points: np.ndarray, alpha: Sequence[int], scale) -> np.ndarray:
    """Tensor-product central difference of d^alpha func at each row of ``points``.

    ``scale`` is a per-point length scale (array of shape (npoints,)).
    """
    points = np.asarray(points, dtype=float)
    scale = np.broadcast_to(np.asarray(scale, dtype=float), points.shape[:1])
    total = int(sum(alpha))
    h = fd_step(total, 1.0) * scale
    axes = [(i, fd_weights(m)) for i, m in enumerate(alpha) if m]
    if not axes:
        return func(points)
    grids = np.meshgrid(*[np.array(offs, dtype=float) for _, (offs, _) in axes], indexing="ij")
    wgrid = np.ones(grids[0].shape)
    for k, (_, (_, ws)) in enumerate(axes):
        shape = [1] * len(axes)
        shape[k] = len(ws)
        wgrid = wgrid * np.asarray(ws).reshape(shape)
    offs = np.stack([g.ravel() for g in grids], axis=-1)  # (S, naxes)
    wflat = wgrid.ravel()
    shifted = np.repeat(points[None, :, :], len(offs), axis=0)  # (S, P, n)
    for k, (i, _) in enumerate(axes):
        shifted[:, :, i] += offs[:, k][:, None] * h[None, :]
    try:
        vals = func(shifted)
    except SingularPoint as exc:
        raise StencilTooWide(str(exc)) from exc
    return np.tensordot(wflat, vals, axes=(0, 0)) / h ** total


# ---------------------------------------------------------------------------
# constant-coefficient bidifferential operators


@dataclass
class BiDiff:
    """sum_alpha c_alpha d^alpha restricted to the diagonal; alpha runs over (y, z)."""

    d: int
    coeffs: Dict[Tuple[int, ...], float]

    @classmethod
    def from_symbol(cls, sym: SymbolPoly, d: int, values: Mapping[str, float]) -> "BiDiff":
        vals = dict(values)
        vals.setdefault("d", d)
        mons = symbol_monomials(sym, d)
        return cls(d, {m: c.evaluate(vals) for m, c in mons.items()})

    @property
    def order(self) -> int:
        return max((sum(a) for a in self.coeffs), default=0)

    def apply_exact(self, f: TestFunction, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xx = np.concatenate([x, x], axis=-1)
        out = np.zeros(x.shape[:-1])
        for alpha, c in self.coeffs.items():
            out = out + c * f.derivative(alpha)(xx)
        return out

    def apply_fd(self, func: Callable, x, scale) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xx = np.concatenate([x, x], axis=-1)
        out = np.zeros(x.shape[:-1])
        for alpha, c in self.coeffs.items():
            out = out + c * fd_derivative(func, xx, alpha, scale)
        return out


@dataclass
class CovarianceReport:
    residual: float
    nu: float
    points: int
    max_abs_rhs: float
    details: Dict[str, float] = field(default_factory=dict)


def covariance_residual(op: BiDiff, lam: float, mu: float, k: int, g: GroupElement, f: TestFunction,
                        points, scale=None) -> CovarianceReport:
    """max_x |D((pi_lam(g) x pi_mu(g)) f)(x) - pi_nu(g)(D f)(x)| / max_x |pi_nu(g)(D f)(x)|.

    nu is always lam + mu + rho + 2k.  The normalization by the largest
    right-hand side over the sample set keeps points where the transformed
    function is tiny from dominating the relative error.
    """
    d = op.d
    rho = d / 2
    nu = lam + mu + rho + 2 * k
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if scale is None:
        scale = local_scale(g, f, x)
    transformed = lambda YZ: pi_pair_apply(g, lam, mu, f, YZ, d)  # noqa: E731
    lhs = op.apply_fd(transformed, x, scale)
    rhs = pi_apply(g, nu, lambda u: op.apply_exact(f, u), x, d)
    denom = float(np.max(np.abs(rhs)))
    res = float(np.max(np.abs(lhs - rhs))) / denom if denom else float("inf")
    return CovarianceReport(res, nu, len(x), denom)


def local_scale(g: GroupElement, f: TestFunction, x) -> np.ndarray:
    """Length scale of the transformed test function near each point.

    The Gaussian width w maps to roughly kappa(g, u) * w at x = g(u); the
    stencil is also kept well inside the distance to any inversion centre.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ginv = g.inverse()
    u, k_inv, _ = _path(ginv, x)
    w = float(np.min(1.0 / np.sqrt(f.a)))
    s = w / k_inv  # kappa(g, u) = 1 / kappa(g^-1, x)
    # distance to the singular locus of g^-1 along its primitive list
    y = x.copy()
    dist = np.full(len(x), np.inf)
    scale_to_x = np.ones(len(x))
    for p in ginv.prims:
        if type(p).__name__ == "Invert":
            dist = np.minimum(dist, np.sqrt(np.sum(y * y, axis=-1)) / scale_to_x)
        kk = p.kappa(y)
        scale_to_x = scale_to_x * kk
        y = p.act(y)
    return np.minimum(s, 0.2 * dist)


def sample_points(rng: np.random.Generator, g: GroupElement, f: TestFunction, d: int, n: int,
                  spread: float = 0.5) -> np.ndarray:
    """Points x = g(u) with u scattered around the test function's centres."""
    centres = [f.c[:d], f.c[d:2 * d]] if f.nvars == 2 * d else [f.c[:d]]
    out = []
    while len(out) < n:
        c = centres[len(out) % len(centres)]
        u = c + spread * rng.standard_normal(d)
        try:
            x = g.act(u[None, :])[0]
            _path(g.inverse(), x[None, :])
        except SingularPoint:
            continue
        if np.all(np.isfinite(x)) and np.linalg.norm(x) < 50:
            out.append(x)
    return np.array(out)


# ---------------------------------------------------------------------------
# duality of pi_lam and pi_-lam


def _trapezoid_2d(func: Callable, centre, half_width: float, n: int) -> float:
    ax0 = np.linspace(centre[0] - half_width, centre[0] + half_width, n)
    ax1 = np.linspace(centre[1] - half_width, centre[1] + half_width, n)
    X, Y = np.meshgrid(ax0, ax1, indexing="ij")
    vals = func(np.stack([X, Y], axis=-1))
    h = ax0[1] - ax0[0]
    return float(np.trapezoid(np.trapezoid(vals, dx=h, axis=1), dx=h))


def duality_residual(g: GroupElement, lam: float, phi: TestFunction, psi: TestFunction,
                     n: int = 801) -> Tuple[float, float, float]:
    """|<pi_lam(g) phi, psi> - <phi, pi_-lam(g^-1) psi>| / |<phi, psi>| on E = R^2.

    Both integrands are localized by a Gaussian factor, so a trapezoid rule on
    a box around that Gaussian converges spectrally.
    """
    d = len(phi.a)
    if d != 2:
        raise ValueError("duality check is implemented for d = 2")
    wpsi = float(np.max(1.0 / np.sqrt(psi.a)))
    wphi = float(np.max(1.0 / np.sqrt(phi.a)))
    lhs = _trapezoid_2d(lambda x: pi_apply(g, lam, phi, x, d, strict=False) * psi(x), psi.c, 8 * wpsi, n)
    rhs = _trapezoid_2d(lambda x: phi(x) * pi_apply(g.inverse(), -lam, psi, x, d, strict=False),
                        phi.c, 8 * wphi, n)
    base = _trapezoid_2d(lambda x: phi(x) * psi(x), phi.c, 8 * wphi, n)
    return abs(lhs - rhs) / abs(base), lhs, rhs


# ---------------------------------------------------------------------------
# adjoint pairing <P f, g> = <f, P^t g> with Gauss-Hermite quadrature


def apply_coord_operator(op: CoordOperator, params: Mapping[str, float], f: TestFunction, x) -> np.ndarray:
    out = np.zeros(np.asarray(x).shape[:-1])
    for alpha, coeff in op.terms.items():
        out = out + evaluate_flat(coeff, params, x) * f.derivative(alpha)(x)
    return out


def _gauss_product_rule(a: np.ndarray, m: np.ndarray, nodes: int):
    """Tensor Gauss-Hermite nodes/weights for integrals against exp(-sum a_i (x_i - m_i)^2)."""
    t, w = np.polynomial.hermite.hermgauss(nodes)
    axes = [m[i] + t / np.sqrt(a[i]) for i in range(len(a))]
    wts = [w / np.sqrt(a[i]) for i in range(len(a))]
    grids = np.meshgrid(*axes, indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.ones(X.shape[0])
    for i, wg in enumerate(np.meshgrid(*wts, indexing="ij")):
        W = W * wg.ravel()
    return X, W


def pairing(u: Callable, v: Callable, fa: TestFunction, fb: TestFunction, nodes: int = 12) -> float:
    """Integral of u * v where the Gaussian envelope is the product of those of fa and fb."""
    a = fa.a + fb.a
    m = (fa.a * fa.c + fb.a * fb.c) / a
    X, W = _gauss_product_rule(a, m, nodes)
    env = np.exp(-np.sum(a * (X - m) ** 2, axis=-1))
    return float(np.sum(W * u(X) * v(X) / env))


def adjoint_pairing_residual(op: CoordOperator, adj: CoordOperator, params: Mapping[str, float],
                             f: TestFunction, g: TestFunction, nodes: int = 12) -> float:
    """|<P f, g> - <f, P^t g>| / max(|<P f, g>|, tiny)."""
    lhs = pairing(lambda X: apply_coord_operator(op, params, f, X), g, f, g, nodes)
    rhs = pairing(f, lambda X: apply_coord_operator(adj, params, g, X), f, g, nodes)
    return abs(lhs - rhs) / max(abs(lhs), 1e-300)


# ---------------------------------------------------------------------------
# sweeps over group classes and parameters

GROUP_CLASSES = ("translate", "rotate", "dilate", "invert")
DEFAULT_PAIRS = ((1 / 3, 1 / 5), (-0.3, 0.7), (0.45, -0.15))


def class_element(rng: np.random.Generator, d: int, kind: str) -> GroupElement:
    """A random element of one class; ``invert`` sandwiches the inversion between translations."""
    from .group import Dilate, Invert, Rotate, Translate, random_orthogonal

    if kind == "translate":
        return GroupElement((Translate(rng.uniform(-1, 1, d)),))
    if kind == "rotate":
        return GroupElement((Rotate(random_orthogonal(rng, d)),))
    if kind == "dilate":
        return GroupElement((Dilate(float(np.exp(rng.uniform(-0.5, 0.5)))),))
    if kind == "invert":
        return GroupElement((Translate(rng.uniform(-1, 1, d)), Invert(), Translate(rng.uniform(-1, 1, d))))
    raise ValueError(f"unknown group class {kind!r}")


@dataclass
class SweepRow:
    label: str
    group: str
    lam: float
    mu: float
    residual: float


def covariance_sweep(symbols: Mapping[str, Tuple[SymbolPoly, int]], d: int = 2,
                     pairs: Sequence[Tuple[float, float]] = DEFAULT_PAIRS,
                     classes: Sequence[str] = GROUP_CLASSES, points: int = 20, seed: int = 0) -> List[SweepRow]:
    """Residuals for every (operator, group class, parameter pair).

    ``symbols`` maps a label to (symbol, k).  Group elements, test functions
    and sample points depend only on (seed, class, pair), so every operator
    is tested on identical data.
    """
    rows: List[SweepRow] = []
    for ci, kind in enumerate(classes):
        for pi, (lam, mu) in enumerate(pairs):
            rng = np.random.default_rng(np.random.SeedSequence([seed, ci, pi]))
            g = class_element(rng, d, kind)
            f = random_test_function(rng, d, blocks=2)
            x = sample_points(rng, g, f, d, points)
            for label, (sym, k) in symbols.items():
                op = BiDiff.from_symbol(sym, d, {"lam": lam, "mu": mu})
                rep = covariance_residual(op, lam, mu, k, g, f, x)
                rows.append(SweepRow(label, kind, lam, mu, rep.residual))
    return rows
