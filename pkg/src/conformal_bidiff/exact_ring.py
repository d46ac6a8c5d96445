"""Exact polynomials and rational functions in the model parameters.

Everything symbolic in the package lives over ``Fraction`` coefficients in
the fixed parameter set ``b1, b2, b3, lam, mu, d`` (the three kernel
exponents, the two representation parameters and the dimension).  The half
dimension ``rho`` is never a separate variable; use :func:`rho`.

Terms are ordered graded-lexicographically with ``b1 > b2 > b3 > lam > mu > d``.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Tuple, Union

from . import _sparse as sp

PARAMS: Tuple[str, ...] = ("b1", "b2", "b3", "lam", "mu", "d")
NPARAMS = len(PARAMS)
_INDEX = {name: i for i, name in enumerate(PARAMS)}
_ZERO_MONO = (0,) * NPARAMS

Scalar = Fraction
Coercible = Union["ParamPoly", Fraction, int]


class NotDivisible(ArithmeticError):
    """Raised by :meth:`ParamPoly.exact_div` when no exact quotient exists."""


class DivisionByZero(ZeroDivisionError):
    pass


def _scalar(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not an exact scalar: {x!r}")


class ParamPoly:
    """Immutable sparse polynomial in :data:`PARAMS` over Q."""

    __slots__ = ("_t", "_hash")

    def __init__(self, terms: Optional[Mapping[Tuple[int, ...], Fraction]] = None):
        t = {}
        if terms:
            for m, c in terms.items():
                c = _scalar(c)
                if c:
                    if len(m) != NPARAMS:
                        raise ValueError(f"exponent vector {m} has wrong length")
                    t[tuple(m)] = c
        self._t = t
        self._hash = None

    @classmethod
    def _raw(cls, t: dict) -> "ParamPoly":
        obj = cls.__new__(cls)
        obj._t = t
        obj._hash = None
        return obj

    # construction -------------------------------------------------------
    @classmethod
    def var(cls, name: str) -> "ParamPoly":
        m = [0] * NPARAMS
        m[_INDEX[name]] = 1
        return cls._raw({tuple(m): Fraction(1)})

    @classmethod
    def const(cls, c) -> "ParamPoly":
        c = _scalar(c)
        return cls._raw({_ZERO_MONO: c} if c else {})

    @classmethod
    def coerce(cls, x: Coercible) -> "ParamPoly":
        if isinstance(x, ParamPoly):
            return x
        return cls.const(x)

    @classmethod
    def parse(cls, text: str) -> "ParamPoly":
        """Inverse of :meth:`to_text`."""
        s = text.replace(" ", "")
        if s in ("", "0"):
            return cls()
        if s[0] not in "+-":
            s = "+" + s
        out: dict = {}
        for sign, body in re.findall(r"([+-])([^+-]+)", s):
            coeff = Fraction(1)
            mono = [0] * NPARAMS
            for factor in body.split("*"):
                if factor in _INDEX or "^" in factor:
                    name, _, e = factor.partition("^")
                    mono[_INDEX[name]] += int(e) if e else 1
                else:
                    coeff *= Fraction(factor)
            if sign == "-":
                coeff = -coeff
            m = tuple(mono)
            out[m] = out.get(m, 0) + coeff
        return cls(out)

    # inspection ---------------------------------------------------------
    @property
    def terms(self) -> dict:
        return self._t

    def sorted_terms(self):
        """Terms in canonical (descending graded-lex) order."""
        return sorted(self._t.items(), key=lambda mc: sp.grlex_key(mc[0]), reverse=True)

    def is_zero(self) -> bool:
        return not self._t

    def is_constant(self) -> bool:
        return not self._t or (len(self._t) == 1 and _ZERO_MONO in self._t)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self._t.get(_ZERO_MONO, Fraction(0))

    def degree(self) -> int:
        return max((sum(m) for m in self._t), default=-1)

    def variables(self) -> set:
        return {PARAMS[i] for m in self._t for i, e in enumerate(m) if e}

    def leading_term(self):
        return max(self._t.items(), key=lambda mc: sp.grlex_key(mc[0]))

    # arithmetic ---------------------------------------------------------
    def __add__(self, other: Coercible) -> "ParamPoly":
        other = ParamPoly.coerce(other)
        return ParamPoly._raw(sp.add(self._t, other._t))

    __radd__ = __add__

    def __sub__(self, other: Coercible) -> "ParamPoly":
        other = ParamPoly.coerce(other)
        return ParamPoly._raw(sp.sub(self._t, other._t))

    def __rsub__(self, other: Coercible) -> "ParamPoly":
        return ParamPoly.coerce(other) - self

    def __neg__(self) -> "ParamPoly":
        return ParamPoly._raw({m: -c for m, c in self._t.items()})

    def __mul__(self, other: Coercible) -> "ParamPoly":
        if isinstance(other, (int, Fraction)):
            return ParamPoly._raw(sp.scale(self._t, other))
        if not isinstance(other, ParamPoly):
            return NotImplemented
        return ParamPoly._raw(sp.mul(self._t, other._t))

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "ParamPoly":
        if n < 0:
            raise ValueError("negative power")
        return ParamPoly._raw(sp.power(self._t, n, NPARAMS))

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                raise DivisionByZero("division by zero scalar")
            return self * (1 / Fraction(other))
        return ParamRat(self, ParamPoly.coerce(other))

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = ParamPoly.const(other)
        if isinstance(other, ParamRat):
            return other == self
        if not isinstance(other, ParamPoly):
            return NotImplemented
        return self._t == other._t

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._t.items()))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self._t)

    def diff(self, name: str) -> "ParamPoly":
        return ParamPoly._raw(sp.diff(self._t, _INDEX[name]))

    def substitute(self, bindings: Mapping[str, Coercible]) -> "ParamPoly":
        """Replace the bound parameters by scalars or polynomials, exactly."""
        if not bindings:
            return self
        idx = {_INDEX[k]: ParamPoly.coerce(v) for k, v in bindings.items()}
        if all(v.is_constant() for v in idx.values()):
            vals = {i: v.constant_value() for i, v in idx.items()}
            out: dict = {}
            for m, c in self._t.items():
                for i, x in vals.items():
                    if m[i]:
                        c = c * x ** m[i]
                        m = m[:i] + (0,) + m[i + 1:]
                if c:
                    v = out.get(m, 0) + c
                    if v:
                        out[m] = v
                    else:
                        del out[m]
            return ParamPoly._raw(out)
        acc: dict = {}
        for m, c in self._t.items():
            rest = list(m)
            term = {}
            factor = ParamPoly.const(c)
            for i, v in idx.items():
                if m[i]:
                    factor = factor * v ** m[i]
                    rest[i] = 0
            term = sp.mul_mono(factor._t, tuple(rest))
            sp.add_into(acc, term)
        return ParamPoly._raw(acc)

    def evaluate(self, values: Mapping[str, float]) -> float:
        total = 0.0
        for m, c in self._t.items():
            v = float(c)
            for i, e in enumerate(m):
                if e:
                    v *= values[PARAMS[i]] ** e
            total += v
        return total

    def exact_div(self, other: Coercible) -> "ParamPoly":
        """Return q with self == q * other, or raise :class:`NotDivisible`."""
        other = ParamPoly.coerce(other)
        if other.is_zero():
            raise DivisionByZero("exact_div by zero polynomial")
        if self.is_zero():
            return ParamPoly()
        lm_b, lc_b = other.leading_term()
        rem = dict(self._t)
        quot: dict = {}
        while rem:
            lm_r = max(rem, key=sp.grlex_key)
            shift = tuple(x - y for x, y in zip(lm_r, lm_b))
            if min(shift) < 0:
                raise NotDivisible(f"{self} is not divisible by {other}")
            c = rem[lm_r] / lc_b
            quot[shift] = c
            sp.add_into(rem, sp.mul_mono(other._t, shift), -c)
        return ParamPoly._raw(quot)

    # text ---------------------------------------------------------------
    def to_text(self) -> str:
        if not self._t:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            factors = []
            for i, e in enumerate(m):
                if e == 1:
                    factors.append(PARAMS[i])
                elif e:
                    factors.append(f"{PARAMS[i]}^{e}")
            mag = abs(c)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = f"{mag}*" + "*".join(factors)
            parts.append(("-" if c < 0 else "+", body))
        head_sign, head = parts[0]
        text = ("-" if head_sign == "-" else "") + head
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    __str__ = to_text

    def __repr__(self) -> str:
        return f"ParamPoly('{self.to_text()}')"


def var(name: str) -> ParamPoly:
    return ParamPoly.var(name)


def const(c) -> ParamPoly:
    return ParamPoly.const(c)


def rho() -> ParamPoly:
    """The half dimension d/2."""
    return ParamPoly.var("d") * Fraction(1, 2)


def pochhammer(a: Coercible, m: int) -> ParamPoly:
    """Rising factorial a (a+1) ... (a+m-1); empty product for m == 0."""
    if m < 0:
        raise ValueError("pochhammer order must be >= 0")
    a = ParamPoly.coerce(a)
    out = ParamPoly.const(1)
    for i in range(m):
        out = out * (a + i)
    return out


# --------------------------------------------------------------------------
# rational functions

_SYMPY_RING = None


def _sympy_ring():
    global _SYMPY_RING
    if _SYMPY_RING is None:
        from sympy.polys.domains import QQ
        from sympy.polys.rings import ring

        R, *_ = ring(",".join(PARAMS), QQ)
        _SYMPY_RING = (R, QQ)
    return _SYMPY_RING


def _to_sympy(p: ParamPoly):
    R, QQ = _sympy_ring()
    return R.from_dict({m: QQ(c.numerator, c.denominator) for m, c in p.terms.items()})


def _from_sympy(e) -> ParamPoly:
    return ParamPoly({m: Fraction(int(c.numerator), int(c.denominator)) for m, c in e.items()})


def cancel(num: ParamPoly, den: ParamPoly) -> Tuple[ParamPoly, ParamPoly]:
    """Remove the polynomial gcd and make ``den`` monic in grlex order."""
    if den.is_zero():
        raise DivisionByZero("zero denominator")
    if num.is_zero():
        return ParamPoly(), ParamPoly.const(1)
    if not den.is_constant():
        try:
            q = num.exact_div(den)
            return q, ParamPoly.const(1)
        except NotDivisible:
            pass
        if not num.is_constant():
            n2, d2 = _to_sympy(num).cancel(_to_sympy(den))
            num, den = _from_sympy(n2), _from_sympy(d2)
    _, lc = den.leading_term()
    if lc != 1:
        num, den = num * (1 / lc), den * (1 / lc)
    return num, den


class ParamRat:
    """Reduced quotient of two :class:`ParamPoly` with a monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num: Coercible, den: Coercible = 1, *, reduced: bool = False):
        num, den = ParamPoly.coerce(num), ParamPoly.coerce(den)
        if not reduced:
            num, den = cancel(num, den)
        self.num = num
        self.den = den

    @classmethod
    def coerce(cls, x) -> "ParamRat":
        if isinstance(x, ParamRat):
            return x
        return cls(ParamPoly.coerce(x), 1, reduced=True)

    def is_polynomial(self) -> bool:
        return self.den == 1

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __bool__(self) -> bool:
        return not self.num.is_zero()

    def __add__(self, other) -> "ParamRat":
        o = ParamRat.coerce(other)
        if self.den == o.den:
            return ParamRat(self.num + o.num, self.den, reduced=self.den == 1)
        return ParamRat(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self) -> "ParamRat":
        return ParamRat(-self.num, self.den, reduced=True)

    def __sub__(self, other) -> "ParamRat":
        return self + (-ParamRat.coerce(other))

    def __rsub__(self, other) -> "ParamRat":
        return ParamRat.coerce(other) - self

    def __mul__(self, other) -> "ParamRat":
        if isinstance(other, (int, Fraction)):
            return ParamRat(self.num * other, self.den, reduced=True) if other else ParamRat(0)
        o = ParamRat.coerce(other)
        if self.den == 1 and o.den == 1:
            return ParamRat(self.num * o.num, 1, reduced=True)
        return ParamRat(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ParamRat":
        o = ParamRat.coerce(other)
        if o.is_zero():
            raise DivisionByZero("division of rational function by zero")
        return ParamRat(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other) -> "ParamRat":
        return ParamRat.coerce(other) / self

    def __pow__(self, n: int) -> "ParamRat":
        if n < 0:
            return ParamRat(1) / (self ** (-n))
        return ParamRat(self.num ** n, self.den ** n, reduced=True)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, ParamPoly)):
            other = ParamRat.coerce(other)
        if not isinstance(other, ParamRat):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def substitute(self, bindings: Mapping[str, Coercible]) -> "ParamRat":
        den = self.den.substitute(bindings)
        if den.is_zero():
            raise DivisionByZero(f"denominator {self.den} vanishes under {dict(bindings)}")
        return ParamRat(self.num.substitute(bindings), den)

    def evaluate(self, values: Mapping[str, float]) -> float:
        return self.num.evaluate(values) / self.den.evaluate(values)

    def to_text(self) -> str:
        if self.den == 1:
            return self.num.to_text()
        return f"({self.num.to_text()})/({self.den.to_text()})"

    __str__ = to_text

    def __repr__(self) -> str:
        return f"ParamRat('{self.to_text()}')"

    @classmethod
    def parse(cls, text: str) -> "ParamRat":
        text = text.strip()
        m = re.fullmatch(r"\((.*)\)/\((.*)\)", text)
        if m:
            return cls(ParamPoly.parse(m.group(1)), ParamPoly.parse(m.group(2)))
        return cls(ParamPoly.parse(text))


def is_proportional(p, q) -> Optional[ParamRat]:
    """The ratio p/q as a rational function, or None when q vanishes."""
    p, q = ParamRat.coerce(p), ParamRat.coerce(q)
    if q.is_zero():
        return None
    return p / q


def common_ratio(pairs: Iterable[Tuple[ParamRat, ParamRat]]) -> Optional[ParamRat]:
    """Single ratio r with p == r*q for every pair, or None if none exists."""
    ratio = None
    for p, q in pairs:
        p, q = ParamRat.coerce(p), ParamRat.coerce(q)
        if q.is_zero():
            if not p.is_zero():
                return None
            continue
        if ratio is None:
            ratio = p / q
        elif p != ratio * q:
            return None
    return ratio
