"""Conformal maps of E = R^d, their conformal factors and the cocycle.

A :class:`GroupElement` is a list of primitives applied left to right, so
``GroupElement((p1, p2)).act(x) == p2(p1(x))``.  The conformal factor
kappa(g, x) is the scalar with |Dg(x) v| = kappa |v|.  All evaluation is
vectorized over leading axes of ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

# points closer than this to an inversion centre are treated as singular
SINGULAR_RADIUS = 1e-3


class SingularPoint(ValueError):
    pass


def _norm2(x: np.ndarray) -> np.ndarray:
    return np.sum(x * x, axis=-1)


@dataclass(frozen=True, eq=False)
class Translate:
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    def act(self, x):
        return x + self.v

    def kappa(self, x):
        return np.ones(x.shape[:-1])

    def jacobian(self, x):
        return np.broadcast_to(np.eye(x.shape[-1]), x.shape + (x.shape[-1],))

    def inverse(self):
        return Translate(-self.v)


@dataclass(frozen=True, eq=False)
class Rotate:
    Q: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if np.linalg.norm(Q.T @ Q - np.eye(Q.shape[0])) > 1e-12:
            raise ValueError("Rotate needs an orthogonal matrix")
        object.__setattr__(self, "Q", Q)

    def act(self, x):
        return x @ self.Q.T

    def kappa(self, x):
        return np.ones(x.shape[:-1])

    def jacobian(self, x):
        return np.broadcast_to(self.Q, x.shape + (x.shape[-1],))

    def inverse(self):
        return Rotate(self.Q.T)


@dataclass(frozen=True, eq=False)
class Dilate:
    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("dilation factor must be positive")

    def act(self, x):
        return self.a * x

    def kappa(self, x):
        return np.full(x.shape[:-1], float(self.a))

    def jacobian(self, x):
        return np.broadcast_to(self.a * np.eye(x.shape[-1]), x.shape + (x.shape[-1],))

    def inverse(self):
        return Dilate(1.0 / self.a)


@dataclass(frozen=True, eq=False)
class Invert:
    """The symmetry x -> -x / |x|^2."""

    def _check(self, x):
        if np.any(np.sqrt(_norm2(x)) < SINGULAR_RADIUS):
            raise SingularPoint("point too close to an inversion centre")

    def act(self, x):
        self._check(x)
        return -x / _norm2(x)[..., None]

    def kappa(self, x):
        self._check(x)
        return 1.0 / _norm2(x)

    def jacobian(self, x):
        self._check(x)
        n2 = _norm2(x)[..., None, None]
        outer = x[..., :, None] * x[..., None, :]
        return -(np.eye(x.shape[-1]) - 2 * outer / n2) / n2

    def inverse(self):
        return self


Primitive = Union[Translate, Rotate, Dilate, Invert]


@dataclass(frozen=True, eq=False)
class GroupElement:
    prims: Tuple[Primitive, ...] = field(default_factory=tuple)

    def act(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        for p in self.prims:
            x = p.act(x)
        return x

    __call__ = act

    def kappa(self, x) -> np.ndarray:
        """Product of primitive factors along the path of x."""
        x = np.asarray(x, dtype=float)
        k = np.ones(x.shape[:-1])
        for p in self.prims:
            k = k * p.kappa(x)
            x = p.act(x)
        return k

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        J = np.broadcast_to(np.eye(x.shape[-1]), x.shape + (x.shape[-1],))
        for p in self.prims:
            J = p.jacobian(x) @ J
            x = p.act(x)
        return J

    def inverse(self) -> "GroupElement":
        return GroupElement(tuple(p.inverse() for p in reversed(self.prims)))

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        """self o other: other acts first."""
        return GroupElement(other.prims + self.prims)

    def describe(self) -> str:
        return " then ".join(type(p).__name__ for p in self.prims) or "identity"


def identity() -> GroupElement:
    return GroupElement(())


def jacobian_kappa(g: GroupElement, x) -> np.ndarray:
    """Conformal factor read off the Jacobian (largest singular value)."""
    J = g.jacobian(x)
    return np.linalg.norm(J, ord=2, axis=(-2, -1))


def conformality_defect(g: GroupElement, x) -> np.ndarray:
    """max | J^T J / kappa^2 - I |, zero for a conformal map."""
    J = g.jacobian(x)
    k = g.kappa(x)
    G = np.swapaxes(J, -1, -2) @ J / (k ** 2)[..., None, None]
    return np.max(np.abs(G - np.eye(J.shape[-1])), axis=(-2, -1))


def cocycle_residual(g1: GroupElement, g2: GroupElement, x) -> np.ndarray:
    """|kappa(g1 g2, x) - kappa(g1, g2 x) kappa(g2, x)| / kappa(g1 g2, x).

    The left side is computed from the Jacobian of the composite map, so the
    check is independent of the multiplicative definition of kappa.
    """
    x = np.asarray(x, dtype=float)
    lhs = jacobian_kappa(g1 @ g2, x)
    rhs = g1.kappa(g2.act(x)) * g2.kappa(x)
    return np.abs(lhs - rhs) / lhs


def distance_identity_residual(g: GroupElement, x, y) -> np.ndarray:
    """Relative residual of |g x - g y|^2 = kappa(g,x) kappa(g,y) |x - y|^2."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    lhs = _norm2(g.act(x) - g.act(y))
    rhs = g.kappa(x) * g.kappa(y) * _norm2(x - y)
    return np.abs(lhs - rhs) / np.abs(lhs)


def stereographic(x) -> np.ndarray:
    """c(x) = ((1 - |x|^2), 2 x) / (1 + |x|^2) on the unit sphere of R^(d+1)."""
    x = np.asarray(x, dtype=float)
    n2 = _norm2(x)[..., None]
    return np.concatenate([(1 - n2), 2 * x], axis=-1) / (1 + n2)


def stereographic_residual(x, y) -> np.ndarray:
    """Relative residual of |c(x) - c(y)| = 2|x - y| / sqrt((1+|x|^2)(1+|y|^2))."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    lhs = np.sqrt(_norm2(stereographic(x) - stereographic(y)))
    rhs = 2 * np.sqrt(_norm2(x - y)) / np.sqrt((1 + _norm2(x)) * (1 + _norm2(y)))
    return np.abs(lhs - rhs) / np.abs(lhs)


def random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def random_primitive(rng: np.random.Generator, d: int, kind: str | None = None) -> Primitive:
    kind = kind or rng.choice(["translate", "rotate", "dilate", "invert"])
    if kind == "translate":
        return Translate(rng.uniform(-1, 1, d))
    if kind == "rotate":
        return Rotate(random_orthogonal(rng, d))
    if kind == "dilate":
        return Dilate(float(np.exp(rng.uniform(-0.7, 0.7))))
    if kind == "invert":
        return Invert()
    raise ValueError(f"unknown primitive kind {kind!r}")


def random_element(rng: np.random.Generator, d: int, length: int = 3) -> GroupElement:
    """Random word containing every primitive kind at least once when length >= 4."""
    kinds = ["translate", "rotate", "dilate", "invert"]
    picks = kinds[:length] if length <= 4 else kinds + list(rng.choice(kinds, length - 4))
    order = rng.permutation(len(picks))
    return GroupElement(tuple(random_primitive(rng, d, picks[i]) for i in order))
