"""Exact calculus on O(d)-invariant kernels in two vector variables.

A kernel is a finite sum

    sum coeff(i, j, k) * s^(b3/2 + i) * t^(b2/2 + j) * r^(b1/2 + k)

with s = |y|^2, t = |z|^2, r = |y - z|^2 and ``coeff`` a polynomial in the
parameters.  The dimension d stays symbolic, so a single identity here holds
for every dimension at once.  The coordinate operators are pushed through the
chain rule in s, t, r; those reductions are cross-checked against the brute
force coordinate calculus in :mod:`conformal_bidiff.coordinate_oracle`.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Dict, Mapping, Tuple

from .exact_ring import Coercible, ParamPoly, var
from .words import Gen, OperatorExpr, UnsupportedGenerator, word_text

Offset = Tuple[int, int, int]

_HALF = Fraction(1, 2)
_AXIS = {"s": 0, "t": 1, "r": 2}
# exponent parameter attached to each invariant: s <-> b3, t <-> b2, r <-> b1
_BETA = {"s": "b3", "t": "b2", "r": "b1"}


class InvariantKernel:
    """Immutable map from integer offsets (i, j, k) to polynomial coefficients."""

    __slots__ = ("_t",)

    def __init__(self, terms: Mapping[Offset, Coercible] | None = None):
        t: Dict[Offset, ParamPoly] = {}
        for off, c in (terms or {}).items():
            c = ParamPoly.coerce(c)
            if not c.is_zero():
                t[tuple(off)] = c
        self._t = t

    @classmethod
    def _raw(cls, t) -> "InvariantKernel":
        obj = cls.__new__(cls)
        obj._t = t
        return obj

    @property
    def terms(self) -> Dict[Offset, ParamPoly]:
        return self._t

    def is_zero(self) -> bool:
        return not self._t

    def __add__(self, other: "InvariantKernel") -> "InvariantKernel":
        out = dict(self._t)
        for off, c in other._t.items():
            v = out[off] + c if off in out else c
            if v.is_zero():
                out.pop(off, None)
            else:
                out[off] = v
        return InvariantKernel._raw(out)

    def __neg__(self) -> "InvariantKernel":
        return InvariantKernel._raw({o: -c for o, c in self._t.items()})

    def __sub__(self, other: "InvariantKernel") -> "InvariantKernel":
        return self + (-other)

    def __mul__(self, c: Coercible) -> "InvariantKernel":
        c = ParamPoly.coerce(c)
        return InvariantKernel({o: c * v for o, v in self._t.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, InvariantKernel):
            return NotImplemented
        return self._t == other._t

    def __hash__(self):
        return hash(frozenset(self._t.items()))

    def substitute(self, bindings: Mapping[str, Coercible]) -> "InvariantKernel":
        return InvariantKernel({o: c.substitute(bindings) for o, c in self._t.items()})

    def to_text(self) -> str:
        if not self._t:
            return "0"
        lines = [f"({i},{j},{k}): {self._t[(i, j, k)].to_text()}" for (i, j, k) in sorted(self._t)]
        return "\n".join(lines)

    __str__ = to_text

    def __repr__(self) -> str:
        return f"InvariantKernel({dict((o, str(c)) for o, c in sorted(self._t.items()))})"

    @classmethod
    def parse(cls, text: str) -> "InvariantKernel":
        text = text.strip()
        if text == "0":
            return cls()
        out = {}
        for line in text.splitlines():
            head, _, body = line.partition(":")
            off = tuple(int(x) for x in head.strip().strip("()").split(","))
            out[off] = ParamPoly.parse(body)
        return cls(out)


def kernel(i: int = 0, j: int = 0, k: int = 0, coeff: Coercible = 1) -> InvariantKernel:
    """The single term coeff * s^(b3/2+i) t^(b2/2+j) r^(b1/2+k)."""
    return InvariantKernel({(i, j, k): coeff})


def _shift(off: Offset, axis: int, by: int) -> Offset:
    o = list(off)
    o[axis] += by
    return tuple(o)


def partial(v: str, K: InvariantKernel) -> InvariantKernel:
    """Derivative with respect to one of the invariants s, t, r."""
    axis = _AXIS[v]
    beta_half = var(_BETA[v]) * _HALF
    out: Dict[Offset, ParamPoly] = {}
    for off, c in K.terms.items():
        new = _shift(off, axis, -1)
        term = c * (beta_half + off[axis])
        if not term.is_zero():
            out[new] = term
    return InvariantKernel._raw(out)


def mul_invariant(v: str, K: InvariantKernel) -> InvariantKernel:
    axis = _AXIS[v]
    return InvariantKernel._raw({_shift(o, axis, 1): c for o, c in K.terms.items()})


def _comb(*parts: Tuple[Coercible, Tuple[str, ...], Tuple[str, ...]], K: InvariantKernel) -> InvariantKernel:
    """sum coeff * (product of invariants) * (partials applied to K)."""
    out = InvariantKernel()
    for coeff, muls, partials in parts:
        X = K
        for p in partials:
            X = partial(p, X)
        for m in muls:
            X = mul_invariant(m, X)
        out = out + X * coeff
    return out


def _d() -> ParamPoly:
    return var("d")


def lap_y(K: InvariantKernel) -> InvariantKernel:
    d = _d()
    return _comb(
        (2 * d, (), ("s",)),
        (2 * d, (), ("r",)),
        (4, ("s",), ("s", "s")),
        (4, ("s",), ("s", "r")),
        (-4, ("t",), ("s", "r")),
        (4, ("r",), ("s", "r")),
        (4, ("r",), ("r", "r")),
        K=K,
    )


def lap_z(K: InvariantKernel) -> InvariantKernel:
    d = _d()
    return _comb(
        (2 * d, (), ("t",)),
        (2 * d, (), ("r",)),
        (4, ("t",), ("t", "t")),
        (4, ("t",), ("t", "r")),
        (-4, ("s",), ("t", "r")),
        (4, ("r",), ("t", "r")),
        (4, ("r",), ("r", "r")),
        K=K,
    )


def mixed_R(K: InvariantKernel) -> InvariantKernel:
    d = _d()
    return _comb(
        (-2 * d, (), ("r",)),
        (2, ("s",), ("s", "t")),
        (2, ("t",), ("s", "t")),
        (-2, ("r",), ("s", "t")),
        (2, ("s",), ("t", "r")),
        (-2, ("t",), ("t", "r")),
        (-2, ("r",), ("t", "r")),
        (2, ("t",), ("s", "r")),
        (-2, ("s",), ("s", "r")),
        (-2, ("r",), ("s", "r")),
        (-4, ("r",), ("r", "r")),
        K=K,
    )


def euler_yz(K: InvariantKernel) -> InvariantKernel:
    """sum_j (y_j - z_j) d/dy_j."""
    return _comb(
        (1, ("s",), ("s",)),
        (-1, ("t",), ("s",)),
        (1, ("r",), ("s",)),
        (2, ("r",), ("r",)),
        K=K,
    )


def euler_zy(K: InvariantKernel) -> InvariantKernel:
    """sum_j (z_j - y_j) d/dz_j."""
    return _comb(
        (1, ("t",), ("t",)),
        (-1, ("s",), ("t",)),
        (1, ("r",), ("t",)),
        (2, ("r",), ("r",)),
        K=K,
    )


def mul_r(K: InvariantKernel) -> InvariantKernel:
    return mul_invariant("r", K)


GENERATORS = {
    Gen.MUL_R: mul_r,
    Gen.LAP_Y: lap_y,
    Gen.LAP_Z: lap_z,
    Gen.MIXED_R: mixed_R,
    Gen.EUL_YZ: euler_yz,
    Gen.EUL_ZY: euler_zy,
}


def apply_word(op: OperatorExpr, K: InvariantKernel) -> InvariantKernel:
    """Apply a formal operator; the rightmost generator of each word acts first."""
    out = InvariantKernel()
    cache: Dict[tuple, InvariantKernel] = {(): K}

    def run(word):
        if word in cache:
            return cache[word]
        g = word[0]
        if g not in GENERATORS:
            raise UnsupportedGenerator(f"{g} has no invariant form (word {word_text(word)})")
        res = GENERATORS[g](run(word[1:]))
        cache[word] = res
        return res

    for word, c in op.words.items():
        if not c.is_polynomial():
            raise ValueError(f"coefficient {c} of {word_text(word)} is not polynomial")
        out = out + run(word) * c.num
    return out


def is_zero(K: InvariantKernel) -> bool:
    return K.is_zero()


def swap_yz(K: InvariantKernel) -> InvariantKernel:
    """Exchange y and z: s <-> t together with b2 <-> b3."""
    b2, b3 = var("b2"), var("b3")
    return InvariantKernel(
        {(j, i, k): c.substitute({"b2": b3, "b3": b2}) for (i, j, k), c in K.terms.items()}
    )
