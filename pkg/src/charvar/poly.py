"""A small sparse multivariate polynomial type with exact differentiation.

Only what the jet computations need: addition, multiplication, partial
derivatives, evaluation and Taylor coefficients.  Coefficients are floats;
exponents are tuples of non-negative ints.
"""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np


class Poly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = nvars
        self.terms = {}
        if terms:
            for e, v in terms.items():
                if v != 0:
                    self.terms[tuple(e)] = self.terms.get(tuple(e), 0.0) + float(v)

    @classmethod
    def const(cls, nvars, value):
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def var(cls, nvars, k):
        e = [0] * nvars
        e[k] = 1
        return cls(nvars, {tuple(e): 1.0})

    def copy(self):
        return Poly(self.nvars, dict(self.terms))

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(self.nvars, other)
        out = defaultdict(float, self.terms)
        for e, v in other.terms.items():
            out[e] += v
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {e: -v for e, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(self.nvars, {e: v * float(other) for e, v in self.terms.items()})
        out = defaultdict(float)
        for e1, v1 in self.terms.items():
            for e2, v2 in other.terms.items():
                out[tuple(a + b for a, b in zip(e1, e2))] += v1 * v2
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def deriv(self, k):
        out = {}
        for e, v in self.terms.items():
            if e[k]:
                e2 = list(e)
                e2[k] -= 1
                out[tuple(e2)] = out.get(tuple(e2), 0.0) + v * e[k]
        return Poly(self.nvars, out)

    def __call__(self, x):
        x = np.asarray(x)
        total = np.zeros(x.shape[:-1], dtype=np.result_type(x, float))
        for e, v in self.terms.items():
            term = v
            for k, p in enumerate(e):
                if p:
                    term = term * x[..., k] ** p
            total = total + term
        return total

    def degree(self):
        return max((sum(e) for e in self.terms), default=-1)

    def truncate(self, deg):
        return Poly(self.nvars, {e: v for e, v in self.terms.items() if sum(e) <= deg})

    def derivative_at_zero(self, e):
        """Partial derivative ``d^e p(0)`` for the multi-index ``e``."""
        v = self.terms.get(tuple(e), 0.0)
        return v * math.prod(math.factorial(p) for p in e)

    def max_jet(self, deg):
        """Largest ``|d^e p(0)|`` over ``|e| <= deg``."""
        vals = [abs(self.derivative_at_zero(e)) for e in self.terms if sum(e) <= deg]
        return max(vals, default=0.0)

    def __repr__(self):
        return f"Poly({self.nvars}, {self.terms!r})"
