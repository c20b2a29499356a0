"""Scalar fields on the line / radial profiles, and potentials built on them.

A `Field` exposes value, first and second derivative with respect to the
scalar coordinate (x on the line, r = |x| radially).  Derivatives come from
closed forms for builtins and from dual numbers for parsed expressions, so
drift inequalities are evaluated without finite-difference noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DifferentiationFailure, OscillationUnavailable
from .expr import PotentialExpr


class Field:
    """Scalar field with two derivatives; subclasses fill in the triple."""

    name = "field"

    def value(self, x):
        raise NotImplementedError

    def deriv(self, x):
        raise NotImplementedError

    def second(self, x):
        raise NotImplementedError

    def laplacian(self, x, d: int = 1):
        """Laplacian of the radial extension f(|x|) in d dimensions.

        For d = 1 this is just f''.  Radially, f'' + (d-1) f'/r.
        """
        if d == 1:
            return self.second(x)
        x = np.asarray(x, dtype=float)
        return self.second(x) + (d - 1) * self.deriv(x) / x

    def __add__(self, other):
        return SumField(self, as_field(other))

    def __mul__(self, c):
        return ScaledField(self, float(c))

    __rmul__ = __mul__


@dataclass
class FuncField(Field):
    """Field from closed-form callables (numpy-vectorized)."""

    f: Callable
    df: Callable
    d2f: Callable
    name: str = "func"

    def value(self, x):
        return self.f(np.asarray(x, dtype=float))

    def deriv(self, x):
        return self.df(np.asarray(x, dtype=float))

    def second(self, x):
        return self.d2f(np.asarray(x, dtype=float))


@dataclass
class ExprFieldAdapter(Field):
    """Field backed by a parsed expression (dual-number derivatives)."""

    expr: PotentialExpr

    @property
    def name(self):
        return str(self.expr)

    def value(self, x):
        return self.expr.value(x)

    def deriv(self, x):
        try:
            return self.expr.deriv(x)
        except ZeroDivisionError as exc:  # pragma: no cover - defensive
            raise DifferentiationFailure(str(exc)) from exc

    def second(self, x):
        try:
            return self.expr.second(x)
        except ZeroDivisionError as exc:  # pragma: no cover - defensive
            raise DifferentiationFailure(str(exc)) from exc


@dataclass
class ConstField(Field):
    c: float
    name: str = "const"

    def value(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.c)

    def deriv(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    second = deriv


@dataclass
class SumField(Field):
    a: Field
    b: Field

    @property
    def name(self):
        return f"({self.a.name}+{self.b.name})"

    def value(self, x):
        return self.a.value(x) + self.b.value(x)

    def deriv(self, x):
        return self.a.deriv(x) + self.b.deriv(x)

    def second(self, x):
        return self.a.second(x) + self.b.second(x)


@dataclass
class ScaledField(Field):
    a: Field
    c: float

    @property
    def name(self):
        return f"{self.c}*{self.a.name}"

    def value(self, x):
        return self.c * self.a.value(x)

    def deriv(self, x):
        return self.c * self.a.deriv(x)

    def second(self, x):
        return self.c * self.a.second(x)


def as_field(obj) -> Field:
    if isinstance(obj, Field):
        return obj
    if isinstance(obj, PotentialExpr):
        return ExprFieldAdapter(obj)
    if isinstance(obj, str):
        return ExprFieldAdapter(PotentialExpr.parse(obj))
    if np.isscalar(obj):
        return ConstField(float(obj))
    raise TypeError(f"cannot interpret {obj!r} as a field")


# Oscillation / minimization grids: golden-section refinement after a coarse
# scan keeps builtin-free potentials cheap but reliable.

_GOLD = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_min(f, a, b, iters=60):
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = f(d)
    return min(fc, fd)


def grid_min(f, lo, hi, n=2048):
    """Coarse scan plus golden-section refinement around the best cell."""
    xs = np.linspace(lo, hi, n)
    vals = np.asarray(f(xs), dtype=float)
    i = int(np.argmin(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n - 1)]
    refined = _golden_min(lambda t: float(f(np.asarray([t]))[0]), a, b)
    return min(float(vals[i]), refined)


@dataclass
class Potential:
    """Scalar potential with metadata used by perturbation transforms.

    `monotone_radial` marks profiles non-decreasing in the coordinate, which
    makes ball oscillations exact; `exact_lower` carries an exact infimum
    when known (builtins), otherwise the lower bound is grid-estimated and
    flagged as uncertified.
    """

    fld: Field
    d: int = 1
    radial: bool = True
    exact_lower: Optional[float] = None
    monotone_radial: bool = False
    name: str = "potential"
    domain: tuple = (0.0, np.inf)

    def value(self, x):
        return self.fld.value(x)

    def grad(self, x):
        return self.fld.deriv(x)

    def second(self, x):
        return self.fld.second(x)

    def laplacian(self, x):
        return self.fld.laplacian(x, self.d)

    def lower_bound(self):
        """Return (m, certified) with m <= inf of the potential."""
        if self.exact_lower is not None:
            return self.exact_lower, True
        lo, hi = self._scan_range()
        m = grid_min(self.value, lo, hi)
        return m, False

    def _scan_range(self):
        lo, hi = self.domain
        if not np.isfinite(hi):
            hi = 1e6
        if not np.isfinite(lo):
            lo = -1e6
        return lo, hi

    def osc_ball(self, R: float) -> float:
        """Oscillation max - min over the ball of radius R (intersected
        with the domain of the potential)."""
        if R <= 0:
            return 0.0
        lo, hi = self.domain
        if self.radial:
            a, b = max(0.0, lo), min(R, hi)
        else:
            a, b = max(-R, lo), min(R, hi)
        if not (b > a):
            raise OscillationUnavailable(f"ball of radius {R} misses the domain")
        if self.monotone_radial and self.radial:
            va = float(np.asarray(self.value(np.asarray([a])))[0])
            vb = float(np.asarray(self.value(np.asarray([b])))[0])
            return abs(vb - va)
        xs = np.linspace(a, b, 4096)
        if self.radial and a == 0.0:
            xs[0] = min(1e-12, b / 2)  # radial fields may be singular at 0
        vals = np.asarray(self.value(xs), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise OscillationUnavailable("potential not finite on the ball")
        return float(np.max(vals)) - float(np.min(vals))

    def shifted(self, c: float) -> "Potential":
        """Potential minus a constant (normalizations cancel in all uses)."""
        return Potential(
            SumField(self.fld, ConstField(-float(c))),
            d=self.d,
            radial=self.radial,
            exact_lower=None if self.exact_lower is None else self.exact_lower - c,
            monotone_radial=self.monotone_radial,
            name=f"{self.name}-{c}",
            domain=self.domain,
        )
