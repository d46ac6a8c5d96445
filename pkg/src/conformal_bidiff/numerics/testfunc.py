"""Polynomial-times-Gaussian test functions with exact derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

Mono = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class TestFunction:
    """f(x) = P(x) * exp(-sum_i a_i (x_i - c_i)^2) on R^n.

    ``n`` is d for a function on E and 2d for a function on E x E (the y
    block first).  Derivatives are computed exactly: each one maps P to
    dP/dx_i - 2 a_i (x_i - c_i) P, so the class is closed under
    differentiation.
    """

    __test__ = False  # keep pytest from collecting this class

    poly: Dict[Mono, float]
    a: np.ndarray
    c: np.ndarray

    @property
    def nvars(self) -> int:
        return len(self.a)

    @classmethod
    def gaussian(cls, n: int, width: float = 1.0, centre=None) -> "TestFunction":
        a = np.full(n, 1.0 / width ** 2)
        c = np.zeros(n) if centre is None else np.asarray(centre, dtype=float)
        return cls({(0,) * n: 1.0}, a, c)

    @classmethod
    def for_blocks(cls, d: int, poly: Dict[Mono, float], widths: Sequence[float],
                   centres: Sequence[Sequence[float]]) -> "TestFunction":
        """One Gaussian width and centre per vector variable."""
        a = np.concatenate([np.full(d, 1.0 / w ** 2) for w in widths])
        c = np.concatenate([np.asarray(cc, dtype=float) for cc in centres])
        return cls(dict(poly), a, c)

    def _dpoly(self, i: int) -> Dict[Mono, float]:
        out: Dict[Mono, float] = {}
        ai, ci = self.a[i], self.c[i]
        for m, v in self.poly.items():
            if m[i]:
                mm = m[:i] + (m[i] - 1,) + m[i + 1:]
                out[mm] = out.get(mm, 0.0) + m[i] * v
            up = m[:i] + (m[i] + 1,) + m[i + 1:]
            out[up] = out.get(up, 0.0) - 2 * ai * v
            if ci:
                out[m] = out.get(m, 0.0) + 2 * ai * ci * v
        return {m: v for m, v in out.items() if v != 0.0}

    def derivative(self, alpha: Sequence[int]) -> "TestFunction":
        f = self
        for i, k in enumerate(alpha):
            for _ in range(k):
                f = TestFunction(f._dpoly(i), f.a, f.c)
        return f

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = np.zeros(x.shape[:-1])
        for m, v in self.poly.items():
            term = np.full(x.shape[:-1], v)
            for i, e in enumerate(m):
                if e:
                    term = term * x[..., i] ** e
            p = p + term
        return p * np.exp(-np.sum(self.a * (x - self.c) ** 2, axis=-1))


def random_test_function(rng: np.random.Generator, d: int, blocks: int = 1, degree: int = 2,
                         width_range=(0.6, 1.2), centre_scale: float = 0.5) -> TestFunction:
    """Random polynomial of the given degree times a Gaussian bump per block."""
    n = d * blocks
    poly: Dict[Mono, float] = {}
    for _ in range(3 + degree):
        m = [0] * n
        for _ in range(int(rng.integers(0, degree + 1))):
            m[int(rng.integers(0, n))] += 1
        poly[tuple(m)] = poly.get(tuple(m), 0.0) + float(rng.uniform(-1, 1))
    poly[(0,) * n] = poly.get((0,) * n, 0.0) + 1.0
    widths = rng.uniform(*width_range, size=blocks)
    centres = [rng.uniform(-centre_scale, centre_scale, d) for _ in range(blocks)]
    return TestFunction.for_blocks(d, poly, widths, centres)


def f0(beta: Sequence[float]):
    """The function (1+|x1|^2)^(-(b2+b3)/2) (1+|x2|^2)^(-(b3+b1)/2) (1+|x3|^2)^(-(b1+b2)/2).

    On the diagonal it reduces to (1+|x|^2)^(-(b1+b2+b3)).
    """
    b1, b2, b3 = (float(b) for b in beta)

    def f(x1, x2, x3):
        n = [1 + np.sum(np.asarray(x, dtype=float) ** 2, axis=-1) for x in (x1, x2, x3)]
        return n[0] ** (-(b2 + b3) / 2) * n[1] ** (-(b3 + b1) / 2) * n[2] ** (-(b1 + b2) / 2)

    return f
