"""Formal differential operators on E x E as sums of generator words.

A word is a tuple of generators read like composition: ``(G1, G2, G3)``
means ``G1 o G2 o G3`` and the rightmost generator acts first.  The empty
word is the identity.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Mapping, Tuple, Union

from .exact_ring import Coercible, ParamRat


class Gen(str, Enum):
    """Generators expressible on O(d)-invariant kernels."""

    MUL_R = "MulR"      # multiplication by |y - z|^2
    LAP_Y = "LapY"
    LAP_Z = "LapZ"
    MIXED_R = "MixedR"  # sum_j d^2 / dy_j dz_j
    EUL_YZ = "EulYZ"    # sum_j (y_j - z_j) d/dy_j
    EUL_ZY = "EulZY"    # sum_j (z_j - y_j) d/dz_j

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Partial:
    """Coordinate derivative d/dy_j or d/dz_j (1-based index)."""

    block: str
    index: int

    def __str__(self) -> str:
        return f"d{self.block}{self.index}"


@dataclass(frozen=True)
class MulCoord:
    """Multiplication by the coordinate y_j or z_j (1-based index)."""

    block: str
    index: int

    def __str__(self) -> str:
        return f"{self.block}{self.index}"


Generator = Union[Gen, Partial, MulCoord]
Word = Tuple[Generator, ...]


class UnsupportedGenerator(ValueError):
    pass


def _word_key(w: Word):
    return (len(w), tuple(str(g) for g in w))


def word_text(w: Word) -> str:
    return "*".join(str(g) for g in w) if w else "Id"


class OperatorExpr:
    """Immutable sum of words with rational-function coefficients."""

    __slots__ = ("_w",)

    def __init__(self, words: Mapping[Word, Coercible] | None = None):
        w: Dict[Word, ParamRat] = {}
        for word, c in (words or {}).items():
            c = ParamRat.coerce(c)
            if not c.is_zero():
                w[tuple(word)] = c
        self._w = w

    @classmethod
    def identity(cls) -> "OperatorExpr":
        return cls({(): 1})

    @classmethod
    def gen(cls, *gens: Generator, coeff: Coercible = 1) -> "OperatorExpr":
        return cls({tuple(gens): coeff})

    @property
    def words(self) -> Dict[Word, ParamRat]:
        return self._w

    def sorted_words(self):
        return sorted(self._w.items(), key=lambda wc: _word_key(wc[0]))

    def __len__(self) -> int:
        return len(self._w)

    def is_zero(self) -> bool:
        return not self._w

    def is_invariant(self) -> bool:
        return all(isinstance(g, Gen) for w in self._w for g in w)

    def is_polynomial(self) -> bool:
        return all(c.is_polynomial() for c in self._w.values())

    def __add__(self, other: "OperatorExpr") -> "OperatorExpr":
        out = dict(self._w)
        for w, c in other._w.items():
            out[w] = out[w] + c if w in out else c
        return OperatorExpr(out)

    def __neg__(self) -> "OperatorExpr":
        return OperatorExpr({w: -c for w, c in self._w.items()})

    def __sub__(self, other: "OperatorExpr") -> "OperatorExpr":
        return self + (-other)

    def __mul__(self, c: Coercible) -> "OperatorExpr":
        c = ParamRat.coerce(c)
        return OperatorExpr({w: c * v for w, v in self._w.items()})

    __rmul__ = __mul__

    def __matmul__(self, other: "OperatorExpr") -> "OperatorExpr":
        """Composition self o other (other acts first)."""
        out: Dict[Word, ParamRat] = {}
        for w1, c1 in self._w.items():
            for w2, c2 in other._w.items():
                w = w1 + w2
                c = c1 * c2
                out[w] = out[w] + c if w in out else c
        return OperatorExpr(out)

    def substitute(self, bindings: Mapping[str, Coercible]) -> "OperatorExpr":
        return OperatorExpr({w: c.substitute(bindings) for w, c in self._w.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        return self._w == other._w

    def __hash__(self):
        return hash(frozenset(self._w.items()))

    def to_json(self) -> list:
        return [{"word": word_text(w), "coeff": c.to_text()} for w, c in self.sorted_words()]

    def to_text(self) -> str:
        if not self._w:
            return "0"
        return " + ".join(f"[{c.to_text()}]*{word_text(w)}" for w, c in self.sorted_words())

    __str__ = to_text

    def __repr__(self) -> str:
        return f"OperatorExpr({self.to_text()})"


@dataclass(frozen=True)
class OperatorChain:
    """Unexpanded composition ``factors[0] o factors[1] o ...``.

    The last factor acts first.  ``diagonal`` marks a bidifferential operator
    whose output is restricted to y = z.
    """

    factors: Tuple[OperatorExpr, ...]
    diagonal: bool = False

    def expand(self) -> OperatorExpr:
        out = OperatorExpr.identity()
        for f in self.factors:
            out = out @ f
        return out

    def substitute(self, bindings) -> "OperatorChain":
        return OperatorChain(tuple(f.substitute(bindings) for f in self.factors), self.diagonal)

    def applied_order(self) -> Iterable[OperatorExpr]:
        return reversed(self.factors)


OperatorLike = Union[OperatorExpr, OperatorChain]


def as_chain(op: OperatorLike) -> OperatorChain:
    if isinstance(op, OperatorChain):
        return op
    return OperatorChain((op,))
