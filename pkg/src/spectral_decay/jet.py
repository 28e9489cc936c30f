"""Truncated Taylor series arithmetic.

A :class:`Jet` of order ``K`` holds the first ``K`` Taylor coefficients
``c_0 + c_1 h + ... + c_{K-1} h^{K-1}`` of an analytic function around a fixed
expansion point. Products, reciprocals and exponentials are propagated exactly
(up to rounding), so the ``k``-th coefficient equals ``f^{(k)}(z0) / k!``.
"""

from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = np.array(coeffs, dtype=complex)
        if self.coeffs.ndim != 1 or len(self.coeffs) == 0:
            raise ValueError("a jet needs at least one coefficient")

    @classmethod
    def constant(cls, value, size: int) -> "Jet":
        c = np.zeros(size, dtype=complex)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, at, size: int) -> "Jet":
        """The identity function ``z`` expanded around ``z = at``."""
        c = np.zeros(size, dtype=complex)
        c[0] = at
        if size > 1:
            c[1] = 1.0
        return cls(c)

    @property
    def size(self) -> int:
        return len(self.coeffs)

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.size != self.size:
                raise ValueError("jet sizes differ")
            return other
        return Jet.constant(other, self.size)

    def __add__(self, other):
        return Jet(self.coeffs + self._coerce(other).coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs)

    def __sub__(self, other):
        return Jet(self.coeffs - self._coerce(other).coeffs)

    def __rsub__(self, other):
        return Jet(self._coerce(other).coeffs - self.coeffs)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coeffs * complex(other))
        other = self._coerce(other)
        return Jet(np.convolve(self.coeffs, other.coeffs)[: self.size])

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        a = self.coeffs
        if a[0] == 0:
            raise ZeroDivisionError("jet with zero constant term has no reciprocal")
        g = np.zeros_like(a)
        g[0] = 1.0 / a[0]
        for k in range(1, self.size):
            g[k] = -g[0] * np.dot(a[1 : k + 1], g[k - 1 :: -1][:k])
        return Jet(g)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coeffs / complex(other))
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def __pow__(self, n: int) -> "Jet":
        if int(n) != n:
            raise ValueError("only integer powers are supported")
        n = int(n)
        base = self if n >= 0 else self.reciprocal()
        n = abs(n)
        result = Jet.constant(1.0, self.size)
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def exp(self) -> "Jet":
        # g = exp(f) satisfies g' = f' g, i.e. k g_k = sum_j j f_j g_{k-j}
        f = self.coeffs
        g = np.zeros_like(f)
        g[0] = np.exp(f[0])
        j = np.arange(1, self.size)
        for k in range(1, self.size):
            g[k] = np.dot(j[:k] * f[1 : k + 1], g[k - 1 :: -1][:k]) / k
        return Jet(g)

    def __repr__(self):
        return f"Jet({self.coeffs!r})"
