"""Sparse polynomial kernels over Q.

A polynomial is a plain ``dict`` mapping exponent tuples to ``Fraction``
coefficients, with no stored zeros.  These helpers are shared by the
parameter polynomials and by the coordinate-space expressions, which use
longer exponent tuples (parameters first, then coordinates).
"""
from __future__ import annotations

from fractions import Fraction
from typing import Dict, Tuple

Mono = Tuple[int, ...]
Poly = Dict[Mono, Fraction]


def add_into(acc: Poly, p: Poly, scale: Fraction | int = 1) -> Poly:
    """acc += scale * p, in place."""
    if not scale:
        return acc
    for m, c in p.items():
        v = acc.get(m, 0) + scale * c
        if v:
            acc[m] = v
        else:
            acc.pop(m, None)
    return acc


def add(p: Poly, q: Poly) -> Poly:
    return add_into(dict(p), q)


def sub(p: Poly, q: Poly) -> Poly:
    return add_into(dict(p), q, -1)


def scale(p: Poly, c: Fraction | int) -> Poly:
    if not c:
        return {}
    return {m: c * v for m, v in p.items()}


def mono_mul(a: Mono, b: Mono) -> Mono:
    return tuple(x + y for x, y in zip(a, b))


def mul(p: Poly, q: Poly) -> Poly:
    if len(p) > len(q):
        p, q = q, p
    out: Poly = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = tuple(x + y for x, y in zip(m1, m2))
            v = out.get(m, 0) + c1 * c2
            if v:
                out[m] = v
            else:
                del out[m]
    return out


def mul_mono(p: Poly, mono: Mono, c: Fraction | int = 1) -> Poly:
    if not c:
        return {}
    return {tuple(x + y for x, y in zip(m, mono)): c * v for m, v in p.items()}


def power(p: Poly, n: int, nvars: int) -> Poly:
    out: Poly = {(0,) * nvars: Fraction(1)}
    base = p
    while n:
        if n & 1:
            out = mul(out, base)
        n >>= 1
        if n:
            base = mul(base, base)
    return out


def diff(p: Poly, i: int) -> Poly:
    out: Poly = {}
    for m, c in p.items():
        e = m[i]
        if e:
            mm = m[:i] + (e - 1,) + m[i + 1:]
            out[mm] = out.get(mm, 0) + e * c
    return {m: c for m, c in out.items() if c}


def pad(p: Poly, before: int = 0, after: int = 0) -> Poly:
    """Embed into a larger variable set by prepending/appending zero exponents."""
    zb, za = (0,) * before, (0,) * after
    return {zb + m + za: c for m, c in p.items()}


def split(p: Poly, k: int) -> Dict[Mono, Poly]:
    """Group by the first ``k`` exponents: {head: {tail: coeff}}."""
    out: Dict[Mono, Poly] = {}
    for m, c in p.items():
        out.setdefault(m[:k], {})[m[k:]] = c
    return out


def grlex_key(m: Mono):
    return (sum(m), m)


def group_tail(p: Poly, k: int) -> Dict[Mono, Poly]:
    """Group by the exponents after position ``k``: {tail: {head: coeff}}."""
    out: Dict[Mono, Poly] = {}
    for m, c in p.items():
        out.setdefault(m[k:], {})[m[:k]] = c
    return out
