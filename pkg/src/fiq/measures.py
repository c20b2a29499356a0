"""Reference measures: registry, normalization, tails, medians, sampling.

Supported shapes: arbitrary potentials on the line (d = 1) and radial
potentials in d >= 2, where every integral reduces to the radius with the
r^(d-1) surface Jacobian.  Heavy tails are integrated after the tangent
change of variables (see `quadrature`), which keeps all quantities accurate
down to tail probabilities of ~1e-30.

A measure is immutable after construction; normalization constants, tail
tabulations and CDF tables are cached lazily and idempotently.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import quadrature as quad
from .errors import BadParameter, NonIntegrable, RatioUnbounded, Unsupported
from .expr import PotentialExpr
from .fields import ConstField, ExprFieldAdapter, FuncField, Potential

# Truncation targets for verification grids: heavy algebraic tails cannot be
# pushed as far as (sub)exponential ones without hurting resolution.
_TRUNC_HEAVY = 1e-8
_TRUNC_LIGHT = 1e-10


def _gamma(x):
    return math.gamma(x)


class Measure:
    """A probability measure e^{-V(x)} dx / Z with numeric services."""

    def __init__(
        self,
        kind: str,
        d: int,
        params: dict,
        potential: Optional[Potential],
        radial: bool,
        support: tuple = (-np.inf, np.inf),
        u_min: float = 1e-26,
        trunc_target: float = _TRUNC_LIGHT,
        components: tuple = (),
    ):
        if d < 1:
            raise BadParameter("dimension must be >= 1")
        if d >= 2 and not radial and kind not in ("product",):
            raise Unsupported("d >= 2 measures must be radial")
        self.kind = kind
        self.d = int(d)
        self.params = dict(params)
        self.potential = potential
        self.radial = radial
        self.support = support
        self.u_min = u_min
        self.trunc_target = trunc_target
        self.components = components
        self._cache = {}

    def __repr__(self):
        ps = " ".join(f"{k}={v}" for k, v in self.params.items())
        return f"Measure({self.kind} d={self.d} {ps})"

    # ------------------------------------------------------------------
    # quadrature plumbing

    @property
    def _interval(self):
        lo, hi = self.support
        return np.isfinite(lo) and np.isfinite(hi)

    def _base_rule(self, pts=16) -> quad.Rule:
        lo, hi = self.support
        if self._interval:
            return quad.interval_rule(lo, hi, panels=128, pts=pts)
        if self.d >= 2:
            r = quad.tail_rule(0.0, u_min=self.u_min, pts=pts)
            jac = quad.sphere_area(self.d) * r.x ** (self.d - 1)
            return quad.Rule(r.x, r.w * jac)
        return quad.line_rule(u_min=self.u_min, pts=pts)

    @property
    def rule(self) -> quad.Rule:
        if "rule" not in self._cache:
            self._cache["rule"] = self._base_rule()
        return self._cache["rule"]

    def unnorm_density(self, x):
        """e^{-V} before normalization (coordinate: x on the line, r radially)."""
        if self.kind == "convolution":
            return self._conv_density(x) * self.normalize()
        x = np.asarray(x, dtype=float)
        v = np.asarray(self.potential.value(x), dtype=float)
        out = np.exp(-v)
        lo, hi = self.support
        if self._interval:
            out = np.where((x >= lo) & (x <= hi), out, 0.0)
        return out

    def normalize(self) -> float:
        """Normalization constant Z, cached; two-resolution error check."""
        if "Z" in self._cache:
            return self._cache["Z"]
        if self.kind == "convolution":
            self._cache["Z"] = 1.0  # convolution of normalized densities
            return 1.0
        z1 = self.rule.integrate(self.unnorm_density)
        z2 = self._base_rule(pts=24).integrate(self.unnorm_density)
        if not (np.isfinite(z1) and z1 > 0.0):
            raise NonIntegrable(f"normalization failed for {self!r}")
        if abs(z2 - z1) > 1e-8 * abs(z1):
            raise NonIntegrable(f"quadrature did not converge for {self!r}")
        self._cache["Z"] = z1
        return z1

    @property
    def Z(self) -> float:
        return self.normalize()

    def density(self, x):
        return self.unnorm_density(x) / self.Z

    def expect(self, f) -> float:
        """Integral of f against the measure (f of the scalar coordinate)."""
        return self.rule.integrate(lambda x: f(x) * self.unnorm_density(x)) / self.Z

    def _check_integrable(self):
        """Reject densities whose tail contributions fail to decay.

        Returns the tail-block integrals so callers can estimate an
        effective tail exponent.
        """
        if self._interval:
            return None
        blocks = []
        for a, b in ((1e2, 1e4), (1e4, 1e6), (1e6, 1e8)):
            r = quad.tail_rule(a, u_min=1.0 / b, pts=12)
            keep = r.x <= b
            rr = quad.Rule(r.x[keep], r.w[keep])
            if self.d >= 2:
                jac = quad.sphere_area(self.d) * rr.x ** (self.d - 1)
                rr = quad.Rule(rr.x, rr.w * jac)
            val = rr.integrate(self.unnorm_density)
            if self.d == 1:
                rl = quad.Rule(-rr.x, rr.w)
                val += rl.integrate(self.unnorm_density)
            blocks.append(val)
        b0, b1, b2 = blocks
        if not all(np.isfinite(blocks)):
            raise NonIntegrable(f"density not finite in the tails of {self!r}")
        if b1 > 0.8 * b0 and b2 > 0.8 * b1 and b2 > 1e-12:
            raise NonIntegrable(f"tail mass of {self!r} does not decay")
        return blocks

    # ------------------------------------------------------------------
    # tails and quantiles

    def _right_mass(self, a: float) -> float:
        """mu(x > a) for d = 1 (unnormalized by Z handled here)."""
        lo, hi = self.support
        if self._interval:
            if a >= hi:
                return 0.0
            r = quad.interval_rule(max(a, lo), hi, panels=64, pts=10)
            return r.integrate(self.unnorm_density) / self.Z
        if a >= 0:
            r = quad.tail_rule(a, u_min=self.u_min)
        else:
            r = quad.tail_rule(0.0, u_min=self.u_min) + quad.interval_rule(a, 0.0, panels=64, pts=12)
        return r.integrate(self.unnorm_density) / self.Z

    def _left_mass(self, b: float) -> float:
        if self.kind == "convolution" or not self.radial:
            # generic: reflect the rule
            lo, hi = self.support
            if self._interval:
                if b <= lo:
                    return 0.0
                r = quad.interval_rule(lo, min(b, hi), panels=64, pts=10)
                return r.integrate(self.unnorm_density) / self.Z
            if b <= 0:
                r = quad.tail_rule(-b, u_min=self.u_min)
                return quad.Rule(-r.x, r.w).integrate(self.unnorm_density) / self.Z
            r = quad.tail_rule(0.0, u_min=self.u_min)
            val = quad.Rule(-r.x, r.w).integrate(self.unnorm_density)
            val += quad.interval_rule(0.0, b, panels=64, pts=12).integrate(self.unnorm_density)
            return val / self.Z
        return self._right_mass(-b)

    def tail(self, r: float, center: float = 0.0) -> float:
        """mu{|x - center| > r}, exact quadrature."""
        if r < 0:
            raise BadParameter("tail radius must be >= 0")
        if r == 0.0:
            return 1.0
        if self.d >= 2:
            if center != 0.0:
                raise Unsupported("radial tails are centered at the origin")
            rr = quad.tail_rule(r, u_min=self.u_min)
            jac = quad.sphere_area(self.d) * rr.x ** (self.d - 1)
            return min(1.0, quad.Rule(rr.x, rr.w * jac).integrate(self.unnorm_density) / self.Z)
        val = self._right_mass(center + r) + self._left_mass(center - r)
        return float(min(1.0, max(0.0, val)))

    def tail_profile(self, center: float = 0.0) -> "TailProfile":
        key = ("tailprof", center)
        if key not in self._cache:
            self._cache[key] = TailProfile.build(self, center)
        return self._cache[key]

    def tail_quantile(self, p: float, center: float = 0.0) -> float:
        """Generalized inverse inf{r : tail(r) <= p}."""
        return self.tail_profile(center).quantile(p)

    def median_abs(self, center: float = 0.0) -> float:
        """A median of |x - center|, located by bisection on the tail."""
        return self.tail_quantile(0.5, center)

    def truncation_radius(self) -> float:
        key = "rtrunc"
        if key not in self._cache:
            if self._interval:
                self._cache[key] = float(max(abs(self.support[0]), abs(self.support[1])))
            else:
                self._cache[key] = self.tail_quantile(self.trunc_target)
        return self._cache[key]

    def ball_mass(self, r: float) -> float:
        return 1.0 - self.tail(r)

    def osc_ball(self, R: float) -> float:
        """Oscillation of the potential over the ball of radius R."""
        if self.potential is None:
            raise Unsupported(f"{self.kind} measure has no potential")
        return self.potential.osc_ball(R)

    # ------------------------------------------------------------------
    # grids

    def solver_grid(self, n: int):
        """Cell-centered nodes + edges for finite-volume discretizations."""
        lo, hi = self.support
        if self._interval:
            return quad.uniform_nodes(lo, hi, n)
        R = self.truncation_radius()
        return quad.tan_nodes(R, n, radial=self.d >= 2)

    def verification_grid(self, n: int = 4096):
        """Tangent-spaced nodes covering the tails, for drift checks."""
        return self.solver_grid(n)[0]

    # ------------------------------------------------------------------
    # sampling

    def _cdf_table(self, n: int = 8192):
        key = "cdf"
        if key in self._cache:
            return self._cache[key]
        if self.d >= 2:
            raise Unsupported("CDF table is a 1D/radial-radius object")
        nodes, edges = self.solver_grid(n)
        gx, gw = np.polynomial.legendre.leggauss(6)
        a = edges[:-1][:, None]
        b = edges[1:][:, None]
        xs = 0.5 * (a + b) + 0.5 * (b - a) * gx[None, :]
        cell = np.sum(0.5 * (b - a) * gw[None, :] * self.density(xs.ravel()).reshape(xs.shape), axis=1)
        left = self._left_mass(edges[0]) if not self._interval else 0.0
        F = np.concatenate([[left], left + np.cumsum(cell)])
        self._cache[key] = (edges, F)
        return self._cache[key]

    def _radial_cdf_table(self, n: int = 8192):
        key = "rcdf"
        if key in self._cache:
            return self._cache[key]
        nodes, edges = self.solver_grid(n)
        gx, gw = np.polynomial.legendre.leggauss(6)
        a = edges[:-1][:, None]
        b = edges[1:][:, None]
        xs = 0.5 * (a + b) + 0.5 * (b - a) * gx[None, :]
        dens = self.density(xs.ravel()).reshape(xs.shape) * quad.sphere_area(self.d) * xs**(self.d - 1)
        cell = np.sum(0.5 * (b - a) * gw[None, :] * dens, axis=1)
        F = np.concatenate([[0.0], np.cumsum(cell)])
        self._cache[key] = (edges, F)
        return self._cache[key]

    def cdf(self, x):
        """CDF for d = 1, by interpolation of the cumulative cell masses."""
        edges, F = self._cdf_table()
        return np.interp(np.asarray(x, dtype=float), edges, F)

    def sample(self, n: int, seed: int = 0):
        """Inverse-CDF sampling; reproducible for a given seed.

        Returns shape (n,) for d = 1 and (n, d) for radial d >= 2.
        """
        rng = np.random.default_rng(seed)
        if self.d == 1:
            edges, F = self._cdf_table()
            u = rng.random(n) * (F[-1] - F[0]) + F[0]
            return np.interp(u, F, edges)
        if not self.radial:
            raise Unsupported("sampling requires d = 1 or a radial measure")
        edges, F = self._radial_cdf_table()
        u = rng.random(n) * F[-1]
        r = np.interp(u, F, edges)
        dirs = rng.standard_normal((n, self.d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return r[:, None] * dirs

    # ------------------------------------------------------------------
    # convolution support (d = 1)

    def _line_edges(self):
        half = [0.0]
        half.extend(quad._geometric_edges(1e-12, 1.0))
        u_edges = quad._geometric_edges(max(self.u_min, 1e-12), np.arctan(1.0))
        half.extend((1.0 / np.tan(u_edges))[::-1])
        half = np.unique(np.asarray(half))
        return np.concatenate([-half[::-1][:-1], half])

    def _conv_density(self, x):
        m1, m2 = self.components
        x0 = np.asarray(x, dtype=float)
        x = np.atleast_1d(x0)
        base = self._cache.setdefault("conv_edges", m2._line_edges())
        out = np.empty_like(x)
        gx, gw = np.polynomial.legendre.leggauss(10)
        for i, xi in enumerate(x):
            edges = np.unique(np.concatenate([base, xi - base]))
            a = edges[:-1][:, None]
            b = edges[1:][:, None]
            ys = 0.5 * (a + b) + 0.5 * (b - a) * gx[None, :]
            w = 0.5 * (b - a) * gw[None, :]
            vals = m1.density(xi - ys.ravel()) * m2.density(ys.ravel())
            out[i] = float(np.sum(w.ravel() * vals))
        return out.reshape(x0.shape)


class TailProfile:
    """Tail function s(r) = mu{|x - center| > r} with a monotone tabulation
    and a generalized inverse refined by root bracketing on the live value."""

    def __init__(self, measure: Measure, center: float, radii, values):
        self.measure = measure
        self.center = center
        self.radii = radii
        self.values = values

    @staticmethod
    def build(measure: Measure, center: float = 0.0, n: int = 160) -> "TailProfile":
        if measure._interval:
            lo, hi = measure.support
            rmax = max(abs(lo - center), abs(hi - center))
            radii = np.linspace(0.0, rmax, n)[1:]
        else:
            radii = np.geomspace(1e-4, 1e13, n)
        vals = np.array([measure.tail(r, center) for r in radii])
        radii = np.concatenate([[0.0], radii])
        vals = np.concatenate([[1.0], vals])
        vals = np.minimum.accumulate(vals)  # enforce monotone against jitter
        return TailProfile(measure, center, radii, vals)

    def value(self, r):
        """Interpolated tail (log-log between tabulation knots)."""
        r = np.asarray(r, dtype=float)
        floor = 1e-300
        lv = np.log(np.maximum(self.values, floor))
        with np.errstate(divide="ignore"):
            lr = np.log(np.maximum(self.radii, 1e-308))
        out = np.interp(np.log(np.maximum(r, 1e-308)), lr[1:], lv[1:])
        out = np.exp(out)
        out = np.where(r <= self.radii[1], np.interp(r, self.radii[:2], self.values[:2]), out)
        return np.clip(out, 0.0, 1.0)

    def value_exact(self, r: float) -> float:
        return self.measure.tail(float(r), self.center)

    def quantile(self, p: float) -> float:
        """Generalized inverse inf{r : s(r) <= p}."""
        if not (0.0 < p <= 1.0):
            raise BadParameter("tail quantile needs p in (0, 1]")
        if p >= 1.0:
            return 0.0
        vals, radii = self.values, self.radii
        idx = np.searchsorted(-vals, -p)  # first index with vals <= p
        if idx >= len(radii):
            lo = radii[-1]
            hi = lo * 2.0
            while self.value_exact(hi) > p:
                hi *= 4.0
                if hi > 1e300:
                    raise NonIntegrable("tail quantile out of range")
            lo = hi / 4.0
        else:
            lo = radii[max(idx - 1, 0)]
            hi = radii[idx]
        if hi <= lo:
            return float(hi)
        f = lambda r: self.value_exact(r) - p
        if f(lo) <= 0.0:
            return float(lo)
        while f(hi) > 0.0:  # tabulation jitter: widen the bracket
            hi *= 2.0
            if hi > 1e300:
                raise NonIntegrable("tail quantile out of range")
        return float(brentq(f, lo, hi, xtol=1e-12 * max(1.0, hi), rtol=1e-12))


# ----------------------------------------------------------------------
# registry constructors

def _cauchy_potential(alpha: float, d: int) -> Potential:
    c = 0.5 * (alpha + d)
    fld = FuncField(
        f=lambda x: c * np.log1p(x * x),
        df=lambda x: 2.0 * c * x / (1.0 + x * x),
        d2f=lambda x: 2.0 * c * (1.0 - x * x) / (1.0 + x * x) ** 2,
        name=f"{c}*ln(1+x^2)",
    )
    return Potential(fld, d=d, radial=True, exact_lower=0.0, monotone_radial=True,
                     name="cauchy", domain=(-np.inf, np.inf))


def cauchy(alpha: float, d: int = 1) -> Measure:
    """Generalized Cauchy: density ~ (1+|x|^2)^(-(alpha+d)/2), alpha > 0."""
    if alpha <= 0:
        raise NonIntegrable("cauchy tail integral diverges for alpha <= 0")
    m = Measure(
        "cauchy", d, {"alpha": alpha}, _cauchy_potential(alpha, d), radial=True,
        u_min=quad.tail_u_min(alpha), trunc_target=_TRUNC_HEAVY,
    )
    return m


def cauchy_z(alpha: float, d: int = 1) -> float:
    """Closed-form normalization of the generalized Cauchy family."""
    return _gamma(alpha / 2.0) * math.pi ** (d / 2.0) / _gamma((alpha + d) / 2.0)


def subbotin(alpha: float, d: int = 1) -> Measure:
    """Exponential-power: density ~ exp(-|x|^alpha), alpha in (0, 1]."""
    if not (0.0 < alpha <= 1.0):
        raise BadParameter("subbotin family is registered for alpha in (0, 1]")
    fld = FuncField(
        f=lambda x: np.abs(x) ** alpha,
        df=lambda x: alpha * np.sign(x) * np.abs(x) ** (alpha - 1.0),
        d2f=lambda x: alpha * (alpha - 1.0) * np.abs(x) ** (alpha - 2.0),
        name=f"|x|^{alpha}",
    )
    pot = Potential(fld, d=d, radial=True, exact_lower=0.0, monotone_radial=True,
                    name="subbotin", domain=(-np.inf, np.inf))
    return Measure("subbotin", d, {"alpha": alpha}, pot, radial=True)


def gaussian(d: int = 1) -> Measure:
    fld = FuncField(f=lambda x: 0.5 * x * x, df=lambda x: x, d2f=lambda x: np.ones_like(x),
                    name="x^2/2")
    pot = Potential(fld, d=d, radial=True, exact_lower=0.0, monotone_radial=True,
                    name="gaussian", domain=(-np.inf, np.inf))
    return Measure("gaussian", d, {}, pot, radial=True)


def uniform_interval(a: float, b: float) -> Measure:
    if not b > a:
        raise BadParameter("uniform interval needs b > a")
    pot = Potential(ConstField(0.0), d=1, radial=False, exact_lower=0.0,
                    monotone_radial=False, name="uniform", domain=(a, b))
    return Measure("uniform", 1, {"a": a, "b": b}, pot, radial=False, support=(a, b))


def custom(potential, d: int = 1, radial: Optional[bool] = None) -> Measure:
    """Measure from a user potential (expression string, PotentialExpr or
    Potential); integrability is checked numerically at construction and the
    truncation depth is tuned to the observed tail exponent."""
    if radial is None:
        radial = d >= 2
    if isinstance(potential, Potential):
        pot = potential
    else:
        if isinstance(potential, str):
            potential = PotentialExpr.parse(potential)
        pot = Potential(ExprFieldAdapter(potential), d=d, radial=radial,
                        name=str(potential), domain=(-np.inf, np.inf))
    m = Measure("custom", d, {"V": pot.name}, pot, radial=radial)
    blocks = m._check_integrable()
    if blocks is not None and blocks[1] > 0 and blocks[2] > 0:
        alpha_eff = -math.log(blocks[2] / blocks[1]) / math.log(1e2)
        if 0.0 < alpha_eff < 30.0:
            m.u_min = quad.tail_u_min(max(alpha_eff - 0.2, 0.05))
            m.trunc_target = _TRUNC_HEAVY
            m._cache.clear()
    m.normalize()
    return m


class _PotentialSum(Potential):
    """Sum of potentials; oscillations scanned on the summed values."""

    def __init__(self, parts, d, radial):
        self.parts = list(parts)
        fld = self.parts[0].fld
        super().__init__(fld, d=d, radial=radial, name="+".join(p.name for p in self.parts),
                         domain=self._merge_domains())
        self.monotone_radial = all(p.monotone_radial for p in self.parts)

    def _merge_domains(self):
        lo = max(p.domain[0] for p in self.parts)
        hi = min(p.domain[1] for p in self.parts)
        return (lo, hi)

    def value(self, x):
        return sum(p.value(x) for p in self.parts)

    def grad(self, x):
        return sum(p.grad(x) for p in self.parts)

    def second(self, x):
        return sum(p.second(x) for p in self.parts)

    def laplacian(self, x):
        return sum(p.laplacian(x) for p in self.parts)

    def lower_bound(self):
        lo, hi = self._scan_range()
        from .fields import grid_min

        return grid_min(self.value, lo, hi), False


def perturbed(base: Measure, U: Potential) -> Measure:
    """Density e^{-U} d(base), renormalized."""
    if base.potential is None:
        raise Unsupported("base measure must have a potential")
    pot = _PotentialSum([base.potential, U], d=base.d, radial=base.radial and U.radial)
    m = Measure(
        "perturbed", base.d, {"base": base.kind, **base.params, "U": U.name},
        pot, radial=base.radial and U.radial, support=base.support,
        u_min=base.u_min, trunc_target=base.trunc_target, components=(base, U),
    )
    if not m._interval:
        m._check_integrable()
    m.normalize()
    return m


def convolution(m1: Measure, m2: Measure) -> Measure:
    if m1.d != 1 or m2.d != 1:
        raise Unsupported("numeric convolution is implemented for d = 1 only")
    return Measure("convolution", 1, {"m1": m1.kind, "m2": m2.kind}, None,
                   radial=False, components=(m1, m2),
                   u_min=min(m1.u_min, m2.u_min), trunc_target=_TRUNC_HEAVY)


def product(measures) -> Measure:
    measures = tuple(measures)
    d = sum(m.d for m in measures)
    return Measure("product", d, {"n": len(measures)}, None, radial=False,
                   components=measures)


# ----------------------------------------------------------------------
# convolution comparison certificate

class ConvRatioReport:
    """Grid sup/inf of (density of m1*m2)/(density of the heavier factor)."""

    def __init__(self, sup, inf, tail_limit, xs, ratios):
        self.sup = sup
        self.inf = inf
        self.tail_limit = tail_limit
        self.xs = xs
        self.ratios = ratios

    def osc_log(self) -> float:
        """Oscillation of ln(ratio): the bounded-perturbation budget."""
        return math.log(self.sup / self.inf)


def convolution_density_ratio(m1: Measure, m2: Measure, xs=None) -> ConvRatioReport:
    """Bounded-perturbation certificate for a convolution of two Cauchy
    factors against the factor with the smaller tail exponent."""
    if m1.kind != "cauchy" or m2.kind != "cauchy" or m1.d != 1 or m2.d != 1:
        raise Unsupported("density-ratio certificate covers 1D Cauchy factors")
    amin = min(m1.params["alpha"], m2.params["alpha"])
    ref = cauchy(amin, 1)
    conv = convolution(m1, m2)
    if xs is None:
        xs = np.concatenate([np.linspace(0.0, 10.0, 41), np.geomspace(12.0, 50.0, 12)])
    return _ratio_report(conv, ref, np.asarray(xs, dtype=float))


def _ratio_report(conv: Measure, ref: Measure, xs) -> ConvRatioReport:
    dens = conv._conv_density(xs)
    ratios = dens / ref.density(xs)
    k = max(4, len(xs) // 4)
    tail = ratios[-k:]
    growing = np.all(np.diff(tail) > 0)
    if growing and tail[-1] > 4.0 * tail[0]:
        raise RatioUnbounded("density ratio keeps growing along the grid")
    # Richardson-style limit in 1/(1+x^2) using the two largest abscissas
    t1, t2 = 1.0 / (1.0 + xs[-2] ** 2), 1.0 / (1.0 + xs[-1] ** 2)
    r1, r2 = ratios[-2], ratios[-1]
    tail_limit = r2 + (r1 - r2) * t2 / (t2 - t1)
    return ConvRatioReport(float(np.max(ratios)), float(np.min(ratios)),
                           float(tail_limit), xs, ratios)
