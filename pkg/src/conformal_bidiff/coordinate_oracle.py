"""Brute-force exact calculus in explicit coordinates at a fixed dimension.

This module is deliberately independent of the invariant chain rule: every
operator is expanded into coordinate derivatives and applied with the plain
product rule.  It serves three purposes:

* the oracle that validates :mod:`conformal_bidiff.invariant_calculus`,
* the normal-form engine for formal adjoints of coordinate operators,
* the symbol extractor, acting on ``exp(<xi, y> + <eta, z>)`` (real
  exponential, so a Laplacian has symbol ``+|xi|^2``).

Polynomials are flat ``dict`` objects whose exponent tuples start with the six
parameter slots followed by the coordinate variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import comb, lcm
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from . import _sparse as sp
from .exact_ring import NPARAMS, PARAMS, ParamPoly, ParamRat, common_ratio
from .invariant_calculus import InvariantKernel
from .words import Gen, MulCoord, OperatorChain, OperatorExpr, OperatorLike, Partial, as_chain, word_text

Offset = Tuple[int, int, int]
_BETA_OF_AXIS = ("b3", "b2", "b1")  # |y|, |z|, |y - z|
_PIDX = {name: i for i, name in enumerate(PARAMS)}


class NotInvariant(ValueError):
    """The y = z = 0 symbol is not a polynomial in |xi|^2, <xi,eta>, |eta|^2."""


def _block_offset(block: str, index: int, d: int) -> int:
    if not 1 <= index <= d:
        raise ValueError(f"coordinate index {index} out of range for d={d}")
    if block == "y":
        return index - 1
    if block == "z":
        return d + index - 1
    raise ValueError(f"unknown block {block!r}")


def _param_flat(p: ParamPoly, nvars: int) -> sp.Poly:
    return sp.pad(p.terms, 0, nvars)


def _require_poly(c: ParamRat, word) -> ParamPoly:
    if not c.is_polynomial():
        raise ValueError(f"coefficient {c} of {word_text(word)} is not polynomial")
    return c.num


# ---------------------------------------------------------------------------
# polynomial building blocks, cached per layout


@lru_cache(maxsize=None)
def _coord_var(nvars: int, pos: int) -> Tuple[Tuple[Tuple[int, ...], Fraction], ...]:
    m = [0] * (NPARAMS + nvars)
    m[NPARAMS + pos] = 1
    return ((tuple(m), Fraction(1)),)


def _var(nvars: int, pos: int) -> sp.Poly:
    return dict(_coord_var(nvars, pos))


@lru_cache(maxsize=None)
def _quad_cached(nvars: int, d: int, which: str) -> Tuple:
    """|y|^2, |z|^2 or |y - z|^2 inside a layout whose first 2d coordinates are y, z."""
    acc: sp.Poly = {}
    for j in range(d):
        y, z = _var(nvars, j), _var(nvars, d + j)
        if which == "s":
            lin = y
        elif which == "t":
            lin = z
        else:
            lin = sp.sub(y, z)
        sp.add_into(acc, sp.mul(lin, lin))
    return tuple(acc.items())


def _quad(nvars: int, d: int, which: str) -> sp.Poly:
    return dict(_quad_cached(nvars, d, which))


@lru_cache(maxsize=None)
def _quad_power(nvars: int, d: int, which: str, n: int) -> Tuple:
    return tuple(sp.power(_quad(nvars, d, which), n, NPARAMS + nvars).items())


def _diff_lin(nvars: int, d: int, j: int) -> sp.Poly:
    """y_j - z_j (0-based j)."""
    return sp.sub(_var(nvars, j), _var(nvars, d + j))


# Packed monomials: exponent vectors encoded as one integer so that monomial
# multiplication is integer addition.  Only used for equality tests.
_PACK_BITS = 12


def _pack(m: Tuple[int, ...]) -> int:
    key = 0
    for i, e in enumerate(m):
        if e >> _PACK_BITS:
            raise OverflowError("exponent too large for packed comparison")
        key |= e << (_PACK_BITS * i)
    return key


def _packed_mul(p: Dict[int, int], q: Dict[int, int]) -> Dict[int, int]:
    out: Dict[int, int] = {}
    get = out.get
    for k1, c1 in p.items():
        for k2, c2 in q.items():
            k = k1 + k2
            out[k] = get(k, 0) + c1 * c2
    return {k: v for k, v in out.items() if v}


@lru_cache(maxsize=None)
def _packed_power_cached(nvars: int, d: int, which: str, n: int) -> Tuple:
    return tuple((_pack(m), int(c)) for m, c in _quad_power(nvars, d, which, n))


def _packed_power(nvars: int, d: int, which: str, n: int) -> Dict[int, int]:
    return dict(_packed_power_cached(nvars, d, which, n))


@lru_cache(maxsize=None)
def _packed_shift(nvars: int, d: int, shift: Offset) -> Tuple:
    """s^a t^b r^c as a packed polynomial, for shift = (a, b, c)."""
    out = {_pack((0,) * (NPARAMS + nvars)): 1}
    for name, n in zip("str", shift):
        if n:
            out = _packed_mul(out, _packed_power(nvars, d, name, n))
    return tuple(out.items())


# ---------------------------------------------------------------------------
# CoordExpr


class CoordExpr:
    """Sum of P(params, y, z) * |y|^(b3+2a) |z|^(b2+2b) |y-z|^(b1+2c) at fixed d.

    ``beta`` optionally binds some of b1, b2, b3 to rationals; bound exponents
    that are even integers are folded into the polynomial part, so the
    specialization beta = 0 yields honest polynomials.
    """

    __slots__ = ("d", "beta", "_t")

    def __init__(self, d: int, terms: Mapping[Offset, sp.Poly] | None = None,
                 beta: Mapping[str, Fraction] | None = None):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        self.d = d
        self.beta = {k: Fraction(v) for k, v in (beta or {}).items()}
        t: Dict[Offset, sp.Poly] = {}
        for off, p in (terms or {}).items():
            if p:
                _merge(t, tuple(off), p)
        self._t = t
        self._fold()

    @property
    def nvars(self) -> int:
        return 2 * self.d

    @property
    def terms(self) -> Dict[Offset, sp.Poly]:
        return self._t

    def _with(self, terms) -> "CoordExpr":
        return CoordExpr(self.d, terms, self.beta)

    def _fold(self) -> None:
        """Absorb even, non-negative total exponents of bound factors into P."""
        folds = []
        for axis, name in enumerate(_BETA_OF_AXIS):
            b = self.beta.get(name)
            if b is not None and b.denominator == 1 and b % 2 == 0:
                folds.append((axis, int(b) // 2))
        if not folds:
            return
        out: Dict[Offset, sp.Poly] = {}
        for off, p in self._t.items():
            o = list(off)
            for axis, e in folds:
                total = e + o[axis]
                if total > 0:
                    p = sp.mul(p, dict(_quad_power(self.nvars, self.d, "str"[axis], total)))
                    o[axis] = -e
                elif total == 0:
                    o[axis] = -e
            if p:
                _merge(out, tuple(o), p)
        self._t = out

    def exponent_factor(self, axis: int, offset: int) -> sp.Poly:
        """The flat polynomial beta_axis + 2*offset."""
        name = _BETA_OF_AXIS[axis]
        n = NPARAMS + self.nvars
        if name in self.beta:
            c = self.beta[name] + 2 * offset
            return {(0,) * n: c} if c else {}
        m = [0] * n
        m[_PIDX[name]] = 1
        out = {tuple(m): Fraction(1)}
        if offset:
            out[(0,) * n] = Fraction(2 * offset)
        return out

    # arithmetic ---------------------------------------------------------
    def __add__(self, other: "CoordExpr") -> "CoordExpr":
        self._check(other)
        t = {o: dict(p) for o, p in self._t.items()}
        for o, p in other._t.items():
            _merge(t, o, p)
        return self._with(t)

    def __neg__(self) -> "CoordExpr":
        return self._with({o: sp.scale(p, -1) for o, p in self._t.items()})

    def __sub__(self, other: "CoordExpr") -> "CoordExpr":
        return self + (-other)

    def mul_poly(self, q: sp.Poly) -> "CoordExpr":
        return self._with({o: sp.mul(p, q) for o, p in self._t.items()})

    def _check(self, other: "CoordExpr") -> None:
        if self.d != other.d or self.beta != other.beta:
            raise ValueError("CoordExpr operands live in different settings")

    def lowered(self) -> Tuple[Offset, sp.Poly]:
        """Single polynomial over the componentwise minimal base offsets."""
        if not self._t:
            return (0, 0, 0), {}
        base = tuple(min(o[a] for o in self._t) for a in range(3))
        return base, self._lower_to(base)

    def _lower_to(self, base: Offset) -> sp.Poly:
        acc: sp.Poly = {}
        for off, p in self._t.items():
            q = p
            for axis, name in enumerate("str"):
                n = off[axis] - base[axis]
                if n:
                    q = sp.mul(q, dict(_quad_power(self.nvars, self.d, name, n)))
            sp.add_into(acc, q)
        return acc

    def is_zero(self) -> bool:
        return not self.lowered()[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoordExpr):
            return NotImplemented
        if self.d != other.d or self.beta != other.beta:
            return False
        # cancel offset by offset first; only a nonzero remainder is lowered
        diff = self - other
        if not diff._t:
            return True
        base = tuple(min(o[a] for o in diff._t) for a in range(3))
        scale = 1
        for p in diff._t.values():
            for c in p.values():
                scale = lcm(scale, c.denominator)
        return not diff._lower_packed(base, scale)

    def _lower_packed(self, base: Offset, scale: int) -> Dict[int, int]:
        """Integer-coefficient, packed-monomial version of :meth:`_lower_to` (fast path)."""
        acc: Dict[int, int] = {}
        for off, p in self._t.items():
            q = {_pack(m): int(c * scale) for m, c in p.items()}
            shift = tuple(o - b for o, b in zip(off, base))
            if any(shift):
                q = _packed_mul(q, dict(_packed_shift(self.nvars, self.d, shift)))
            for k, v in q.items():
                w = acc.get(k, 0) + v
                if w:
                    acc[k] = w
                else:
                    acc.pop(k, None)
        return acc

    def __hash__(self):
        raise TypeError("CoordExpr is not hashable")

    def polynomial_part(self) -> sp.Poly:
        """The polynomial when every term has zero offsets, else ValueError."""
        if not self._t:
            return {}
        if set(self._t) != {(0, 0, 0)} or any(
            name not in self.beta or self.beta[name] != 0 for name in _BETA_OF_AXIS
        ):
            raise ValueError("expression is not a plain polynomial")
        return self._t[(0, 0, 0)]

    def to_text(self) -> str:
        base, p = self.lowered()
        names = list(PARAMS) + [f"y{j + 1}" for j in range(self.d)] + [f"z{j + 1}" for j in range(self.d)]
        return f"[{_flat_text(p, names)}] * radial{base}"

    __str__ = to_text


def _merge(t: Dict[Offset, sp.Poly], off: Offset, p: sp.Poly) -> None:
    if off in t:
        sp.add_into(t[off], p)
        if not t[off]:
            del t[off]
    elif p:
        t[off] = dict(p)


def _flat_text(p: sp.Poly, names) -> str:
    if not p:
        return "0"
    parts = []
    for m, c in sorted(p.items(), key=lambda mc: sp.grlex_key(mc[0]), reverse=True):
        fac = [n if e == 1 else f"{n}^{e}" for n, e in zip(names, m) if e]
        parts.append("*".join([str(c)] + fac) if fac else str(c))
    return " + ".join(parts)


def coord_kernel(d: int, poly: sp.Poly | None = None, offset: Offset = (0, 0, 0),
                 beta: Mapping[str, Fraction] | None = None) -> CoordExpr:
    n = NPARAMS + 2 * d
    return CoordExpr(d, {offset: poly if poly is not None else {(0,) * n: Fraction(1)}}, beta)


def coordinate(d: int, block: str, index: int, beta=None) -> CoordExpr:
    """The plain polynomial y_j or z_j, all radial exponents set to zero."""
    b = {"b1": 0, "b2": 0, "b3": 0}
    b.update(beta or {})
    return CoordExpr(d, {(0, 0, 0): _var(2 * d, _block_offset(block, index, d))}, b)


def embed(K: InvariantKernel, d: int, beta: Mapping[str, Fraction] | None = None) -> CoordExpr:
    """Expand an invariant kernel at dimension d (optionally binding beta)."""
    beta = {k: Fraction(v) for k, v in (beta or {}).items()}
    bind = {"d": d, **beta}
    n = 2 * d
    terms = {}
    for off, c in K.terms.items():
        terms[off] = _param_flat(c.substitute(bind), n)
    return CoordExpr(d, terms, beta)


def partial_coord(block: str, index: int, X: CoordExpr) -> CoordExpr:
    """Exact derivative with respect to y_index or z_index."""
    d, n = X.d, X.nvars
    pos = _block_offset(block, index, d)
    j = index - 1
    sign = 1 if block == "y" else -1
    own_axis = 0 if block == "y" else 1
    own_lin = _var(n, pos)
    rel_lin = sp.scale(_diff_lin(n, d, j), sign)
    out: Dict[Offset, sp.Poly] = {}
    for off, p in X.terms.items():
        _merge(out, off, sp.diff(p, NPARAMS + pos))
        f_own = X.exponent_factor(own_axis, off[own_axis])
        if f_own:
            o = list(off)
            o[own_axis] -= 1
            _merge(out, tuple(o), sp.mul(sp.mul(p, f_own), own_lin))
        f_rel = X.exponent_factor(2, off[2])
        if f_rel:
            _merge(out, (off[0], off[1], off[2] - 1), sp.mul(sp.mul(p, f_rel), rel_lin))
    return X._with(out)


def mul_coord(block: str, index: int, X: CoordExpr) -> CoordExpr:
    return X.mul_poly(_var(X.nvars, _block_offset(block, index, X.d)))


def lap_coord(block: str, X: CoordExpr) -> CoordExpr:
    out = X._with({})
    for j in range(1, X.d + 1):
        out = out + partial_coord(block, j, partial_coord(block, j, X))
    return out


def mixed_coord(X: CoordExpr) -> CoordExpr:
    out = X._with({})
    for j in range(1, X.d + 1):
        out = out + partial_coord("y", j, partial_coord("z", j, X))
    return out


def euler_coord(block: str, X: CoordExpr) -> CoordExpr:
    """sum_j (y_j - z_j) d/dy_j for block y, sum_j (z_j - y_j) d/dz_j for block z."""
    sign = 1 if block == "y" else -1
    out = X._with({})
    for j in range(1, X.d + 1):
        lin = sp.scale(_diff_lin(X.nvars, X.d, j - 1), sign)
        out = out + partial_coord(block, j, X).mul_poly(lin)
    return out


def _apply_gen_coord(g, X: CoordExpr) -> CoordExpr:
    if g == Gen.MUL_R:
        return X.mul_poly(_quad(X.nvars, X.d, "r"))
    if g == Gen.LAP_Y:
        return lap_coord("y", X)
    if g == Gen.LAP_Z:
        return lap_coord("z", X)
    if g == Gen.MIXED_R:
        return mixed_coord(X)
    if g == Gen.EUL_YZ:
        return euler_coord("y", X)
    if g == Gen.EUL_ZY:
        return euler_coord("z", X)
    if isinstance(g, Partial):
        return partial_coord(g.block, g.index, X)
    if isinstance(g, MulCoord):
        return mul_coord(g.block, g.index, X)
    raise TypeError(f"unknown generator {g!r}")


def apply_coord(op: OperatorExpr, X: CoordExpr) -> CoordExpr:
    """Apply a formal operator in coordinates (rightmost generator first)."""
    bind = {"d": X.d, **X.beta}
    cache = {(): X}

    def run(word):
        if word not in cache:
            cache[word] = _apply_gen_coord(word[0], run(word[1:]))
        return cache[word]

    out = X._with({})
    for word, c in op.words.items():
        coeff = _param_flat(_require_poly(c, word).substitute(bind), X.nvars)
        out = out + run(word).mul_poly(coeff)
    return out


# ---------------------------------------------------------------------------
# coordinate differential operators in normal form


MultiIndex = Tuple[int, ...]


class CoordOperator:
    """sum_alpha a_alpha(params, y, z) * d^alpha with derivatives on the right.

    Multi-indices run over (y_1..y_d, z_1..z_d); equality is structural on
    this normal form, which is unique.
    """

    __slots__ = ("d", "_t")

    def __init__(self, d: int, terms: Mapping[MultiIndex, sp.Poly] | None = None):
        self.d = d
        t: Dict[MultiIndex, sp.Poly] = {}
        for a, p in (terms or {}).items():
            if p:
                _merge(t, tuple(a), p)
        self._t = t

    @property
    def terms(self):
        return self._t

    @property
    def nvars(self) -> int:
        return 2 * self.d

    def _zero_mono(self):
        return (0,) * (NPARAMS + self.nvars)

    @classmethod
    def identity(cls, d: int) -> "CoordOperator":
        return cls(d, {(0,) * (2 * d): {(0,) * (NPARAMS + 2 * d): Fraction(1)}})

    @classmethod
    def multiplication(cls, d: int, p: sp.Poly) -> "CoordOperator":
        return cls(d, {(0,) * (2 * d): p})

    @classmethod
    def derivative(cls, d: int, pos: int, order: int = 1) -> "CoordOperator":
        a = [0] * (2 * d)
        a[pos] = order
        return cls(d, {tuple(a): {(0,) * (NPARAMS + 2 * d): Fraction(1)}})

    def __add__(self, other: "CoordOperator") -> "CoordOperator":
        t = {a: dict(p) for a, p in self._t.items()}
        for a, p in other._t.items():
            _merge(t, a, p)
        return CoordOperator(self.d, t)

    def __neg__(self) -> "CoordOperator":
        return CoordOperator(self.d, {a: sp.scale(p, -1) for a, p in self._t.items()})

    def __sub__(self, other: "CoordOperator") -> "CoordOperator":
        return self + (-other)

    def scale_poly(self, q: sp.Poly) -> "CoordOperator":
        return CoordOperator(self.d, {a: sp.mul(q, p) for a, p in self._t.items()})

    def __matmul__(self, other: "CoordOperator") -> "CoordOperator":
        """Composition self o other, via Leibniz: d^a (b f) = sum C(a,g) d^g b d^(a-g) f."""
        out: Dict[MultiIndex, sp.Poly] = {}
        for alpha, a in self._t.items():
            for beta, b in other._t.items():
                for gamma in product(*(range(k + 1) for k in alpha)):
                    db = b
                    mult = 1
                    for pos, g in enumerate(gamma):
                        for _ in range(g):
                            db = sp.diff(db, NPARAMS + pos)
                            if not db:
                                break
                        mult *= comb(alpha[pos], g)
                        if not db:
                            break
                    if not db:
                        continue
                    rest = tuple(x - g + y for x, g, y in zip(alpha, gamma, beta))
                    _merge(out, rest, sp.scale(sp.mul(a, db), mult))
        return CoordOperator(self.d, out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoordOperator):
            return NotImplemented
        return self.d == other.d and self._t == other._t

    def __hash__(self):
        raise TypeError("CoordOperator is not hashable")

    def order(self) -> int:
        return max((sum(a) for a in self._t), default=-1)

    def substitute(self, bindings: Mapping[str, Fraction]) -> "CoordOperator":
        idx = {_PIDX[k]: Fraction(v) for k, v in bindings.items()}
        out: Dict[MultiIndex, sp.Poly] = {}
        for a, p in self._t.items():
            q: sp.Poly = {}
            for m, c in p.items():
                mm = list(m)
                for i, v in idx.items():
                    if mm[i]:
                        c = c * v ** mm[i]
                        mm[i] = 0
                sp.add_into(q, {tuple(mm): c})
            _merge(out, a, q)
        return CoordOperator(self.d, out)

    def to_text(self) -> str:
        d = self.d
        names = list(PARAMS) + [f"y{j + 1}" for j in range(d)] + [f"z{j + 1}" for j in range(d)]
        dn = [f"dy{j + 1}" for j in range(d)] + [f"dz{j + 1}" for j in range(d)]
        lines = []
        for a in sorted(self._t, key=lambda a: (sum(a), a)):
            der = "*".join(n if e == 1 else f"{n}^{e}" for n, e in zip(dn, a) if e) or "Id"
            lines.append(f"({_flat_text(self._t[a], names)})*{der}")
        return "\n".join(lines) if lines else "0"

    __str__ = to_text


def _gen_operator(g, d: int) -> CoordOperator:
    n = 2 * d
    one = CoordOperator.identity(d)
    if g == Gen.MUL_R:
        return CoordOperator.multiplication(d, _quad(n, d, "r"))
    if g in (Gen.LAP_Y, Gen.LAP_Z):
        shift = 0 if g == Gen.LAP_Y else d
        out = CoordOperator(d)
        for j in range(d):
            out = out + CoordOperator.derivative(d, shift + j, 2)
        return out
    if g == Gen.MIXED_R:
        out = CoordOperator(d)
        for j in range(d):
            out = out + CoordOperator.derivative(d, j) @ CoordOperator.derivative(d, d + j)
        return out
    if g in (Gen.EUL_YZ, Gen.EUL_ZY):
        sign, shift = (1, 0) if g == Gen.EUL_YZ else (-1, d)
        out = CoordOperator(d)
        for j in range(d):
            lin = sp.scale(_diff_lin(n, d, j), sign)
            out = out + CoordOperator.multiplication(d, lin) @ CoordOperator.derivative(d, shift + j)
        return out
    if isinstance(g, Partial):
        return CoordOperator.derivative(d, _block_offset(g.block, g.index, d))
    if isinstance(g, MulCoord):
        return CoordOperator.multiplication(d, _var(n, _block_offset(g.block, g.index, d)))
    if g is None:
        return one
    raise TypeError(f"unknown generator {g!r}")


def to_coord_operator(op: OperatorExpr, d: int, bindings: Mapping[str, Fraction] | None = None) -> CoordOperator:
    """Render a formal operator in coordinates at dimension d (d is bound)."""
    bind = {"d": d, **(bindings or {})}
    gens: Dict = {}
    out = CoordOperator(d)
    for word, c in op.words.items():
        coeff = _param_flat(_require_poly(c, word).substitute(bind), 2 * d)
        term = CoordOperator.multiplication(d, coeff)
        for g in word:
            if g not in gens:
                gens[g] = _gen_operator(g, d)
            term = term @ gens[g]
        out = out + term
    return out


def formal_adjoint(op: OperatorExpr | CoordOperator, d: int | None = None) -> CoordOperator:
    """Transpose: (a d^alpha)^t = (-1)^|alpha| d^alpha o a, in normal form."""
    if isinstance(op, OperatorExpr):
        if d is None:
            raise ValueError("dimension required for a formal operator")
        op = to_coord_operator(op, d)
    dim = op.d
    out = CoordOperator(dim)
    for alpha, a in op.terms.items():
        der = CoordOperator.identity(dim)
        for pos, k in enumerate(alpha):
            if k:
                der = der @ CoordOperator.derivative(dim, pos, k)
        piece = der @ CoordOperator.multiplication(dim, a)
        out = out + (piece if sum(alpha) % 2 == 0 else -piece)
    return out


# ---------------------------------------------------------------------------
# exponential calculus and symbols


@dataclass
class ExpPolyExpr:
    """P(params, y, z, xi, eta) * exp(<xi, y> + <eta, z>) at fixed d."""

    d: int
    poly: sp.Poly = field(default_factory=dict)

    @property
    def nvars(self) -> int:
        return 4 * self.d

    @classmethod
    def exponential(cls, d: int) -> "ExpPolyExpr":
        return cls(d, {(0,) * (NPARAMS + 4 * d): Fraction(1)})

    def yz_degree(self, mono) -> int:
        return sum(mono[NPARAMS:NPARAMS + 2 * self.d])


def _exp_partial(P: sp.Poly, d: int, pos: int) -> sp.Poly:
    """d/dx acting on P * exp: dP/dx + dual(x) * P."""
    n = 4 * d
    out = sp.diff(P, NPARAMS + pos)
    sp.add_into(out, sp.mul_mono(P, tuple(1 if i == NPARAMS + 2 * d + pos else 0 for i in range(NPARAMS + n))))
    return out


def _exp_gen(g, P: sp.Poly, d: int) -> sp.Poly:
    n = 4 * d
    if g == Gen.MUL_R:
        return sp.mul(P, _quad(n, d, "r"))
    if g in (Gen.LAP_Y, Gen.LAP_Z):
        shift = 0 if g == Gen.LAP_Y else d
        acc: sp.Poly = {}
        for j in range(d):
            sp.add_into(acc, _exp_partial(_exp_partial(P, d, shift + j), d, shift + j))
        return acc
    if g == Gen.MIXED_R:
        acc = {}
        for j in range(d):
            sp.add_into(acc, _exp_partial(_exp_partial(P, d, d + j), d, j))
        return acc
    if g in (Gen.EUL_YZ, Gen.EUL_ZY):
        sign, shift = (1, 0) if g == Gen.EUL_YZ else (-1, d)
        acc = {}
        for j in range(d):
            lin = sp.scale(_diff_lin(n, d, j), sign)
            sp.add_into(acc, sp.mul(lin, _exp_partial(P, d, shift + j)))
        return acc
    if isinstance(g, Partial):
        return _exp_partial(P, d, _block_offset(g.block, g.index, d))
    if isinstance(g, MulCoord):
        return sp.mul(P, _var(n, _block_offset(g.block, g.index, d)))
    raise TypeError(f"unknown generator {g!r}")


# how far one generator can lower the (y, z)-degree of P
_DROP = {Gen.MUL_R: -2, Gen.LAP_Y: 2, Gen.LAP_Z: 2, Gen.MIXED_R: 2, Gen.EUL_YZ: 0, Gen.EUL_ZY: 0}


def _gen_drop(g) -> int:
    if isinstance(g, Partial):
        return 1
    if isinstance(g, MulCoord):
        return -1
    return _DROP[g]


def _factor_drop(op: OperatorExpr) -> int:
    return max((sum(_gen_drop(g) for g in w) for w in op.words), default=0)


def _apply_factor_exp(op: OperatorExpr, P: sp.Poly, d: int, bind, keep: Optional[int]) -> sp.Poly:
    n = 4 * d
    cache = {(): P}

    def run(word):
        if word not in cache:
            cache[word] = _exp_gen(word[0], run(word[1:]), d)
        return cache[word]

    acc: sp.Poly = {}
    for word, c in op.words.items():
        coeff = _param_flat(_require_poly(c, word).substitute(bind), n)
        sp.add_into(acc, sp.mul(coeff, run(word)))
    if keep is not None:
        lo, hi = NPARAMS, NPARAMS + 2 * d
        acc = {m: c for m, c in acc.items() if sum(m[lo:hi]) <= keep}
    return acc


def exp_apply(op: OperatorLike, d: int, *, prune_for_symbol: bool = False,
              bindings: Mapping[str, Fraction] | None = None) -> ExpPolyExpr:
    """Apply an operator (or chain) to exp(<xi,y> + <eta,z>).

    With ``prune_for_symbol`` terms that cannot survive the final restriction
    y = z = 0 are discarded after each factor of a chain.
    """
    chain = as_chain(op)
    bind = {"d": d, **(bindings or {})}
    factors = list(chain.applied_order())
    drops = [_factor_drop(f) for f in factors]
    P = ExpPolyExpr.exponential(d).poly
    for m, f in enumerate(factors):
        keep = sum(drops[m + 1:]) if prune_for_symbol else None
        P = _apply_factor_exp(f, P, d, bind, keep)
    return ExpPolyExpr(d, P)


@lru_cache(maxsize=None)
def _abc_expansion(d: int, a: int, b: int, c: int) -> Tuple:
    """A^a B^b C^c as a polynomial in (xi, eta) only (2d variables)."""
    n = 2 * d
    nv = n  # layout without params
    zero = (0,) * nv

    def v(i):
        m = [0] * nv
        m[i] = 1
        return {tuple(m): Fraction(1)}

    A, B, C = {}, {}, {}
    for j in range(d):
        sp.add_into(A, sp.mul(v(j), v(j)))
        sp.add_into(B, sp.mul(v(j), v(d + j)))
        sp.add_into(C, sp.mul(v(d + j), v(d + j)))
    out = {zero: Fraction(1)}
    for base, e in ((A, a), (B, b), (C, c)):
        out = sp.mul(out, sp.power(base, e, nv))
    return tuple(out.items())


def _solve_exact(rows, unknowns):
    """Pick an invertible square subsystem of a rational matrix.

    ``rows`` maps a row key to a list of Fractions (one per unknown).  Returns
    (pivot_row_keys, inverse matrix) or raises NotInvariant if rank deficient.
    """
    u = len(unknowns)
    keys = list(rows)
    chosen = []
    basis = []  # reduced rows for independence test
    for k in keys:
        vec = list(rows[k])
        for piv, bvec in basis:
            if vec[piv]:
                f = vec[piv] / bvec[piv]
                vec = [x - f * y for x, y in zip(vec, bvec)]
        nz = next((i for i, x in enumerate(vec) if x), None)
        if nz is not None:
            basis.append((nz, vec))
            chosen.append(k)
            if len(chosen) == u:
                break
    if len(chosen) < u:
        raise NotInvariant("A, B, C monomials are dependent at this dimension")
    M = [list(rows[k]) + [Fraction(int(i == r)) for i in range(u)] for r, k in enumerate(chosen)]
    for col in range(u):
        piv = next(r for r in range(col, u) if M[r][col])
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(u):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    # M = [I | S^-1] where S[r][i] = rows[chosen[r]][i]; x = S^-1 b
    inverse = [row[u:] for row in M]
    return chosen, inverse


def restrict_symbol(e: ExpPolyExpr) -> "SymbolPoly":
    """Set y = z = 0 and rewrite the result in A = |xi|^2, B = <xi,eta>, C = |eta|^2."""
    d = e.d
    lo, hi = NPARAMS, NPARAMS + 2 * d
    by_deg: Dict[int, Dict[Tuple[int, ...], Dict]] = {}
    for m, c in e.poly.items():
        if any(m[lo:hi]):
            continue
        dual = m[hi:]
        by_deg.setdefault(sum(dual), {}).setdefault(dual, {})[m[:NPARAMS]] = c
    out: Dict[Tuple[int, int, int], ParamRat] = {}
    for deg, target in sorted(by_deg.items()):
        if deg % 2:
            raise NotInvariant(f"odd-degree symbol component (degree {deg})")
        n = deg // 2
        unknowns = [(a, b, n - a - b) for a in range(n, -1, -1) for b in range(n - a, -1, -1)]
        expansions = [dict(_abc_expansion(d, *abc)) for abc in unknowns]
        monos = set(target)
        for ex in expansions:
            monos.update(ex)
        rows = {mono: [ex.get(mono, Fraction(0)) for ex in expansions] for mono in sorted(monos)}
        chosen, inv = _solve_exact(rows, unknowns)
        sol = []
        for i in range(len(unknowns)):
            acc: sp.Poly = {}
            for r, key in enumerate(chosen):
                if inv[i][r] and key in target:
                    sp.add_into(acc, target[key], inv[i][r])
            sol.append(acc)
        # verify the full (overdetermined) system
        for mono in monos:
            lhs: sp.Poly = {}
            for x, ex in zip(sol, expansions):
                c = ex.get(mono)
                if c:
                    sp.add_into(lhs, x, c)
            if lhs != target.get(mono, {}):
                raise NotInvariant("symbol is not a polynomial in A, B, C")
        for abc, x in zip(unknowns, sol):
            if x:
                out[abc] = ParamRat(ParamPoly(x))
    return SymbolPoly(d, out)


class SymbolPoly:
    """Polynomial in A = |xi|^2, B = <xi, eta>, C = |eta|^2 with ParamRat coefficients."""

    __slots__ = ("d", "_t")

    def __init__(self, d: Optional[int], terms: Mapping[Tuple[int, int, int], object] | None = None):
        self.d = d
        t = {}
        for k, c in (terms or {}).items():
            c = ParamRat.coerce(c)
            if not c.is_zero():
                t[tuple(k)] = c
        self._t = t

    @property
    def terms(self) -> Dict[Tuple[int, int, int], ParamRat]:
        return self._t

    @classmethod
    def monomial(cls, a: int, b: int, c: int, coeff=1, d: Optional[int] = None) -> "SymbolPoly":
        return cls(d, {(a, b, c): coeff})

    def __add__(self, other: "SymbolPoly") -> "SymbolPoly":
        t = dict(self._t)
        for k, c in other._t.items():
            t[k] = t[k] + c if k in t else c
        return SymbolPoly(self.d if self.d is not None else other.d, t)

    def __neg__(self) -> "SymbolPoly":
        return SymbolPoly(self.d, {k: -c for k, c in self._t.items()})

    def __sub__(self, other: "SymbolPoly") -> "SymbolPoly":
        return self + (-other)

    def __mul__(self, other) -> "SymbolPoly":
        if isinstance(other, SymbolPoly):
            t: Dict = {}
            for k1, c1 in self._t.items():
                for k2, c2 in other._t.items():
                    k = tuple(x + y for x, y in zip(k1, k2))
                    t[k] = t[k] + c1 * c2 if k in t else c1 * c2
            return SymbolPoly(self.d if self.d is not None else other.d, t)
        c = ParamRat.coerce(other)
        return SymbolPoly(self.d, {k: v * c for k, v in self._t.items()})

    __rmul__ = __mul__

    def substitute(self, bindings) -> "SymbolPoly":
        return SymbolPoly(self.d, {k: c.substitute(bindings) for k, c in self._t.items()})

    def is_zero(self) -> bool:
        return not self._t

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymbolPoly):
            return NotImplemented
        return self._t == other._t

    def __hash__(self):
        return hash(frozenset(self._t.items()))

    def is_proportional(self, other: "SymbolPoly") -> Optional[ParamRat]:
        """Ratio self/other if it is one rational function for every monomial."""
        if other.is_zero():
            return None
        keys = set(self._t) | set(other._t)
        zero = ParamRat(0)
        r = common_ratio((self._t.get(k, zero), other._t.get(k, zero)) for k in sorted(keys))
        if r is None or r.is_zero():
            return None
        return r

    def sorted_terms(self):
        return sorted(self._t.items(), key=lambda kc: (-sum(kc[0]), tuple(-x for x in kc[0])))

    def to_text(self) -> str:
        if not self._t:
            return "0"
        parts = []
        for (a, b, c), coeff in self.sorted_terms():
            mon = "*".join(n if e == 1 else f"{n}^{e}" for n, e in (("A", a), ("B", b), ("C", c)) if e)
            parts.append(f"[{coeff.to_text()}]" + (f"*{mon}" if mon else ""))
        return " + ".join(parts)

    __str__ = to_text

    def __repr__(self) -> str:
        return f"SymbolPoly({self.to_text()})"

    def to_json(self) -> list:
        return [{"A": a, "B": b, "C": c, "coeff": v.to_text()} for (a, b, c), v in self.sorted_terms()]


def symbol(op: OperatorLike, d: int, bindings: Mapping[str, Fraction] | None = None) -> SymbolPoly:
    """Symbol of an operator restricted to y = z = 0 (the diagonal at the origin)."""
    return restrict_symbol(exp_apply(op, d, prune_for_symbol=True, bindings=bindings))


def symbol_monomials(sym: SymbolPoly, d: int) -> Dict[Tuple[int, ...], ParamRat]:
    """Expand A^a B^b C^c into (xi, eta) monomials; xi <-> d/dy, eta <-> d/dz."""
    out: Dict[Tuple[int, ...], ParamRat] = {}
    for abc, coeff in sym.terms.items():
        for mono, c in _abc_expansion(d, *abc):
            v = coeff * c
            out[mono] = out[mono] + v if mono in out else v
    return {m: c for m, c in out.items() if not c.is_zero()}


def evaluate_flat(p: sp.Poly, params: Mapping[str, float], coords) -> np.ndarray:
    """Numerically evaluate a flat (params + coordinates) polynomial; coords has shape (..., n)."""
    coords = np.asarray(coords, dtype=float)
    pv = [float(params.get(name, 0.0)) for name in PARAMS]
    out = np.zeros(coords.shape[:-1])
    for m, c in p.items():
        v = float(c)
        for i in range(NPARAMS):
            if m[i]:
                v *= pv[i] ** m[i]
        term = np.full(coords.shape[:-1], v)
        for j, e in enumerate(m[NPARAMS:]):
            if e:
                term = term * coords[..., j] ** e
        out = out + term
    return out


# ---------------------------------------------------------------------------
# randomized cross-validation of the invariant chain rule


@dataclass
class CrossCheckReport:
    cases: int
    mismatches: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.mismatches


def random_kernel(rng, max_terms: int = 2, spread: int = 1, symbolic: bool = False) -> InvariantKernel:
    """Small random kernel with offsets in [-spread, spread]^3.

    Coefficients are rationals, or a + b*lam when ``symbolic`` is set.
    """
    from .exact_ring import var

    K = InvariantKernel()
    for _ in range(rng.randint(1, max_terms)):
        off = tuple(rng.randint(-spread, spread) for _ in range(3))
        coeff = Fraction(rng.randint(-5, 5) or 1, rng.randint(1, 4))
        if symbolic:
            coeff = coeff + rng.randint(-2, 2) * var("lam")
        K = K + InvariantKernel({off: coeff})
    return K


def random_beta(rng) -> Dict[str, Fraction]:
    return {b: Fraction(rng.randint(-9, 9), rng.randint(1, 7)) for b in ("b1", "b2", "b3")}


def cross_validate(cases: int = 200, dims: Iterable[int] = (2, 3, 4), seed: int = 0) -> CrossCheckReport:
    """Compare the invariant chain rule with the coordinate oracle on random kernels.

    For every dimension and generator, ``cases`` random (kernel, beta) pairs
    are pushed through both engines and compared exactly.
    """
    import random
    import time

    from .invariant_calculus import GENERATORS

    rng = random.Random(seed)
    t0 = time.perf_counter()
    report = CrossCheckReport(0)
    for d in dims:
        for g, rule in GENERATORS.items():
            op = OperatorExpr.gen(g)
            for _ in range(cases):
                K, beta = random_kernel(rng), random_beta(rng)
                report.cases += 1
                if embed(rule(K), d, beta) != apply_coord(op, embed(K, d, beta)):
                    report.mismatches.append((d, g.name, K.to_text(), {k: str(v) for k, v in beta.items()}))
    report.seconds = time.perf_counter() - t0
    return report
