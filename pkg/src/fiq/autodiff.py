"""Forward-mode automatic differentiation with second-order dual numbers.

A `Dual2` carries (value, first derivative, second derivative) with respect
to a single scalar variable.  All components may be numpy arrays, so one
evaluation differentiates a whole grid at once.  Used by the expression
evaluator and by drift-inequality checks, where finite differences would be
too noisy.
"""

from __future__ import annotations

import numpy as np

from .errors import ExprDomainError


class Dual2:
    """Truncated Taylor triple (f, f', f'') under arithmetic propagation."""

    __slots__ = ("v", "d1", "d2")

    def __init__(self, v, d1=0.0, d2=0.0):
        self.v = v
        self.d1 = d1
        self.d2 = d2

    @staticmethod
    def variable(x):
        """Seed the independent variable: value x, derivative 1."""
        x = np.asarray(x, dtype=float)
        return Dual2(x, np.ones_like(x), np.zeros_like(x))

    @staticmethod
    def constant(c):
        return Dual2(np.asarray(c, dtype=float), 0.0, 0.0)

    def _coerce(self, other):
        if isinstance(other, Dual2):
            return other
        return Dual2.constant(other)

    def __add__(self, other):
        o = self._coerce(other)
        return Dual2(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return Dual2(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)

    def __rsub__(self, other):
        o = self._coerce(other)
        return Dual2(o.v - self.v, o.d1 - self.d1, o.d2 - self.d2)

    def __neg__(self):
        return Dual2(-self.v, -self.d1, -self.d2)

    def __mul__(self, other):
        o = self._coerce(other)
        return Dual2(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        return self * o._reciprocal()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        return o * self._reciprocal()

    def _reciprocal(self):
        w = 1.0 / self.v
        d1 = -self.d1 * w * w
        d2 = (2.0 * self.d1 * self.d1 / self.v - self.d2) * w * w
        return Dual2(w, d1, d2)

    def __pow__(self, c):
        if isinstance(c, Dual2):
            raise TypeError("exponent must be a plain number")
        return dpow(self, float(c))


def _chain(u: Dual2, f, fp, fpp) -> Dual2:
    """Compose f with u: (f(u), f'(u)u', f''(u)u'^2 + f'(u)u'')."""
    return Dual2(f, fp * u.d1, fpp * u.d1 * u.d1 + fp * u.d2)


def dpow(u: Dual2, c: float) -> Dual2:
    v = np.asarray(u.v, dtype=float)
    if c == int(c) and c >= 0:
        f = v**c
        fp = c * v ** (c - 1) if c != 0 else np.zeros_like(v)
        fpp = c * (c - 1) * v ** (c - 2) if c not in (0, 1) else np.zeros_like(v)
    else:
        if np.any(v < 0.0):
            raise ExprDomainError(f"negative base for non-integer power {c}")
        f = v**c
        fp = c * v ** (c - 1)
        fpp = c * (c - 1) * v ** (c - 2)
    return _chain(u, f, fp, fpp)


def dln(u: Dual2) -> Dual2:
    v = np.asarray(u.v, dtype=float)
    if np.any(v <= 0.0):
        raise ExprDomainError("ln of a non-positive argument")
    return _chain(u, np.log(v), 1.0 / v, -1.0 / (v * v))


def dexp(u: Dual2) -> Dual2:
    e = np.exp(u.v)
    return _chain(u, e, e, e)


def dsqrt(u: Dual2) -> Dual2:
    v = np.asarray(u.v, dtype=float)
    if np.any(v < 0.0):
        raise ExprDomainError("sqrt of a negative argument")
    r = np.sqrt(v)
    return _chain(u, r, 0.5 / r, -0.25 / (r * v))


def dabs(u: Dual2) -> Dual2:
    # Derivative convention sign(0) = 0 at the kink.
    s = np.sign(u.v)
    return Dual2(np.abs(u.v), s * u.d1, s * u.d2)
