"""Drift (Lyapunov) certificates and the weighted diffusion generator.

Three drift variants are verified on tangent-spaced grids covering the
tails:

  weak      L_V F / F <= -phi(x) + b 1_{|x| <= R}
  phi       L_V F     <= -phi(F) + b 1_{|x| <= R}        (phi increasing)
  weighted  L^w_V F   <= -theta F + b 1_{|x| <= R}

with F >= 1.  Verification is numerical and reported as such; violations
are measured relative to max(|LHS|, |RHS|, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import BadParameter, CertificateInvalid, FarFieldViolated, PhiUNotPositive
from .fields import Field, FuncField, Potential
from .measures import Measure

DEFAULT_TOL = 1e-9
DEFAULT_GRID = 4096


# ----------------------------------------------------------------------
# generator

@dataclass
class WeightedGenerator:
    """Diffusion generator with position-dependent mobility omega^2.

    Unweighted (omega = None) this is the overdamped Langevin generator
    Delta - grad V . grad; with a weight, the drift acquires the grad(omega^2)
    term that keeps e^{-V} dx invariant.
    """

    potential: Potential
    omega: Optional[Field] = None
    d: int = 1

    def omega_value(self, x):
        if self.omega is None:
            return np.ones_like(np.asarray(x, dtype=float))
        return self.omega.value(x)

    def omega2(self, x):
        w = self.omega_value(x)
        return w * w

    def omega2_deriv(self, x):
        if self.omega is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return 2.0 * self.omega.value(x) * self.omega.deriv(x)

    def drift(self, x):
        """b = grad(omega^2) - omega^2 grad V."""
        return self.omega2_deriv(x) - self.omega2(x) * self.potential.grad(x)

    def diffusion(self, x):
        return math.sqrt(2.0) * self.omega_value(x)

    def apply(self, f: Field, x):
        """L^w f = omega^2 Lap f + (grad omega^2 - omega^2 grad V) . grad f."""
        x = np.asarray(x, dtype=float)
        return self.omega2(x) * f.laplacian(x, self.d) + self.drift(x) * f.deriv(x)


def apply_generator(gen, f: Field, x):
    """Evaluate a generator at x; accepts a WeightedGenerator or a Measure
    (interpreted as its unweighted Langevin generator)."""
    if isinstance(gen, Measure):
        gen = WeightedGenerator(gen.potential, None, gen.d)
    return gen.apply(f, x)


# ----------------------------------------------------------------------
# certificates

@dataclass
class DriftReport:
    status: str
    max_violation: float
    worst_x: float
    tol: float
    n_points: int
    side_violation: float = 0.0  # weighted variant's perturbation condition

    @property
    def verified(self) -> bool:
        return self.status == "verified"


@dataclass
class LyapunovCertificate:
    """Drift certificate (F, phi/theta, b, R) with a verification report."""

    F: Field
    variant: str  # "weak" | "phi" | "weighted"
    b: float
    R: float
    phi: Optional[Field] = None  # weak variant: dissipation as a field of x
    phi_of_u: Optional["PhiFunction"] = None  # phi variant: function of F
    theta: Optional[float] = None  # weighted variant
    omega: Optional[Field] = None
    report: Optional[DriftReport] = None
    provenance: str = ""

    def require_verified(self, variant: str):
        if self.variant != variant:
            raise CertificateInvalid(f"expected a {variant!r} certificate, got {self.variant!r}")
        if self.report is None or not self.report.verified:
            raise CertificateInvalid("certificate did not pass grid verification")


@dataclass(frozen=True)
class PhiFunction:
    """C^1 increasing dissipation u -> coef * u^expo (expo in (0, 1])."""

    coef: float
    expo: float

    def __call__(self, u):
        return self.coef * np.asarray(u, dtype=float) ** self.expo

    def deriv(self, u):
        u = np.asarray(u, dtype=float)
        return self.coef * self.expo * u ** (self.expo - 1.0)


def _lv_over(measure: Measure, F: Field, x):
    gen = WeightedGenerator(measure.potential, None, measure.d)
    return gen.apply(F, x)


def _rel_violation(lhs, rhs):
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    return (lhs - rhs) / scale


def verify_certificate(cert: LyapunovCertificate, measure: Measure, grid=None,
                       tol: float = DEFAULT_TOL) -> DriftReport:
    """Check the drift inequality pointwise; failure is a status, not an error."""
    if grid is None:
        grid = measure.verification_grid(DEFAULT_GRID)
    x = np.asarray(grid, dtype=float)
    Fv = cert.F.value(x)
    if np.any(Fv < 1.0 - 1e-12):
        return DriftReport("failed", float(np.max(1.0 - Fv)), float(x[np.argmin(Fv)]),
                           tol, x.size)
    ball = np.abs(x) <= cert.R
    if cert.variant == "weak":
        lhs = _lv_over(measure, cert.F, x) / Fv
        rhs = -cert.phi.value(x) + cert.b * ball
    elif cert.variant == "phi":
        lhs = _lv_over(measure, cert.F, x)
        rhs = -cert.phi_of_u(Fv) + cert.b * ball
    elif cert.variant == "weighted":
        gen = WeightedGenerator(measure.potential, cert.omega, measure.d)
        lhs = gen.apply(cert.F, x)
        rhs = -cert.theta * Fv + cert.b * ball
    else:
        raise BadParameter(f"unknown certificate variant {cert.variant!r}")
    viol = _rel_violation(lhs, rhs)
    i = int(np.argmax(viol))
    status = "verified" if viol[i] <= tol else "failed"
    return DriftReport(status, float(viol[i]), float(x[i]), tol, x.size)


def normalize_far_field(F: Field, phi: Field, K: float, measure: Measure,
                        grid=None, tol: float = DEFAULT_TOL) -> LyapunovCertificate:
    """Promote a far-field drift bound L_V F / F <= -phi for |x| >= K into a
    global weak certificate with b = 2M, R = K, where M bounds |L_V F / F|
    and |phi| over the ball."""
    if grid is None:
        grid = measure.verification_grid(DEFAULT_GRID)
    x = np.asarray(grid, dtype=float)
    if K >= np.max(np.abs(x)):
        raise BadParameter("far-field radius exceeds the verification grid")
    far = np.abs(x) >= K
    lhs = _lv_over(measure, F, x) / F.value(x)
    phiv = phi.value(x)
    viol = _rel_violation(lhs[far], -phiv[far])
    if np.max(viol) > tol:
        i = int(np.argmax(viol))
        raise FarFieldViolated(f"drift fails at x = {x[far][i]:.6g}")
    ball = ~far
    M = max(float(np.max(np.abs(lhs[ball]))), float(np.max(np.abs(phiv[ball]))))
    if not np.isfinite(M):
        raise FarFieldViolated("drift ratio unbounded on the ball")
    cert = LyapunovCertificate(F=F, variant="weak", b=2.0 * M, R=K, phi=phi,
                               provenance="far-field-normalized")
    rep = verify_certificate(cert, measure, grid=x, tol=tol)
    return replace(cert, report=rep)


def _tight_ball_constant(F: Field, phi: Field, K: float, measure: Measure, grid,
                         tol: float = DEFAULT_TOL, headroom: float = 1.05) -> LyapunovCertificate:
    """Far-field certificate with the direct ball constant
    b = headroom * sup_ball (L_V F / F + phi)_+, which stays finite even when
    |L_V F / F| blows up with a favourable sign (e.g. cusps at the origin)."""
    x = np.asarray(grid, dtype=float)
    far = np.abs(x) >= K
    lhs = _lv_over(measure, F, x) / F.value(x)
    phiv = phi.value(x)
    viol = _rel_violation(lhs[far], -phiv[far])
    if np.max(viol) > tol:
        i = int(np.argmax(viol))
        raise FarFieldViolated(f"drift fails at x = {x[far][i]:.6g}")
    excess = lhs[~far] + phiv[~far]
    b = headroom * max(0.0, float(np.max(excess)))
    cert = LyapunovCertificate(F=F, variant="weak", b=b, R=K, phi=phi,
                               provenance="far-field-tight")
    rep = verify_certificate(cert, measure, grid=x, tol=tol)
    return replace(cert, report=rep)


def perturbed_drift(cert: LyapunovCertificate, U: Potential, measure: Measure,
                    grid=None):
    """Dissipation of the perturbed measure: phi_U = phi + <grad U, grad F>/F.

    Returns (phi_U field, positivity report); raises PhiUNotPositive with the
    witnessing grid point when phi_U fails to stay positive outside the ball.
    """
    cert.require_verified("weak")
    phi, F = cert.phi, cert.F

    def phi_u_vals(x):
        x = np.asarray(x, dtype=float)
        return phi.value(x) + U.grad(x) * F.deriv(x) / F.value(x)

    phi_U = FuncField(
        f=phi_u_vals,
        df=lambda x: _num_deriv(phi_u_vals, x),
        d2f=lambda x: _num_second(phi_u_vals, x),
        name="phi_U",
    )
    if grid is None:
        grid = measure.verification_grid(DEFAULT_GRID)
    x = np.asarray(grid, dtype=float)
    outside = np.abs(x) > cert.R
    vals = phi_u_vals(x[outside])
    if np.any(vals <= 0.0):
        bad = x[outside][vals <= 0.0][0]
        raise PhiUNotPositive(f"phi_U <= 0 at x = {bad:.6g}", witness=float(bad))
    report = DriftReport("verified", float(-np.min(vals)), float(x[outside][np.argmin(vals)]),
                         0.0, int(np.sum(outside)))
    return phi_U, report


def _num_deriv(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    step = h * np.maximum(1.0, np.abs(x))
    return (f(x + step) - f(x - step)) / (2.0 * step)


def _num_second(f, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    step = h * np.maximum(1.0, np.abs(x))
    return (f(x + step) - 2.0 * f(x) + f(x - step)) / step**2


@dataclass
class WeightedDriftReport:
    """Outcome of the weighted drift check, carrying the data consumed by
    the weighted-constant perturbation bound."""

    status: str
    theta: float
    theta_prime: float
    b: float
    R: float
    drift_violation: float
    side_violation: float
    witness: float

    @property
    def verified(self) -> bool:
        return self.status == "verified"


def weighted_lyapunov_check(omega: Field, measure: Measure, F: Field, theta: float,
                            b: float, R: float, U: Optional[Potential] = None,
                            theta_prime: Optional[float] = None, grid=None,
                            tol: float = DEFAULT_TOL) -> WeightedDriftReport:
    """Verify L^w F <= -theta F + b 1_{|x| <= R} and, when a perturbation U is
    supplied, the side condition -omega^2 grad U . grad F <= theta' F with
    theta' < theta."""
    if U is not None:
        if theta_prime is None:
            raise BadParameter("theta_prime is required together with U")
        if not theta_prime < theta:
            raise BadParameter("need theta_prime < theta")
    if grid is None:
        grid = measure.verification_grid(DEFAULT_GRID)
    x = np.asarray(grid, dtype=float)
    gen = WeightedGenerator(measure.potential, omega, measure.d)
    Fv = F.value(x)
    lhs = gen.apply(F, x)
    rhs = -theta * Fv + b * (np.abs(x) <= R)
    viol = _rel_violation(lhs, rhs)
    i = int(np.argmax(viol))
    drift_viol = float(viol[i])
    side_viol = -np.inf
    if U is not None:
        w2 = gen.omega2(x)
        side_lhs = -w2 * U.grad(x) * F.deriv(x)
        side = _rel_violation(side_lhs, theta_prime * Fv)
        j = int(np.argmax(side))
        side_viol = float(side[j])
        if side_viol > drift_viol:
            i = j
    status = "verified" if max(drift_viol, side_viol) <= tol else "failed"
    return WeightedDriftReport(status, theta, 0.0 if theta_prime is None else theta_prime,
                               b, R, drift_viol, max(side_viol, 0.0), float(x[i]))


# ----------------------------------------------------------------------
# standard certificate builders

def _cauchy_F(k: float) -> Field:
    return FuncField(
        f=lambda x: (1.0 + x * x) ** k,
        df=lambda x: 2.0 * k * x * (1.0 + x * x) ** (k - 1.0),
        d2f=lambda x: 2.0 * k * (1.0 + x * x) ** (k - 2.0) * (1.0 + (2.0 * k - 1.0) * x * x),
        name=f"(1+x^2)^{k}",
    )


def _inverse_quadratic_phi(c: float) -> Field:
    return FuncField(
        f=lambda x: c / (1.0 + x * x),
        df=lambda x: -2.0 * c * x / (1.0 + x * x) ** 2,
        d2f=lambda x: c * (6.0 * x * x - 2.0) / (1.0 + x * x) ** 3,
        name=f"{c}/(1+x^2)",
    )


def _power_phi(c: float, p: float) -> Field:
    return FuncField(
        f=lambda x: c * np.abs(x) ** p,
        df=lambda x: c * p * np.sign(x) * np.abs(x) ** (p - 1.0),
        d2f=lambda x: c * p * (p - 1.0) * np.abs(x) ** (p - 2.0),
        name=f"{c}|x|^{p}",
    )


def _subbotin_F(gamma: float, alpha: float) -> Field:
    def val(x):
        return np.exp(gamma * np.abs(x) ** alpha)

    def d1(x):
        return gamma * alpha * np.sign(x) * np.abs(x) ** (alpha - 1.0) * val(x)

    def d2(x):
        a = np.abs(x)
        return (gamma * alpha * (alpha - 1.0) * a ** (alpha - 2.0)
                + (gamma * alpha) ** 2 * a ** (2.0 * alpha - 2.0)) * val(x)

    return FuncField(f=val, df=d1, d2f=d2, name=f"exp({gamma}|x|^{alpha})")


def standard_weak_certificate(measure: Measure, k: Optional[float] = None,
                              gamma: float = 0.5, safety: float = 0.9,
                              grid=None) -> LyapunovCertificate:
    """Grid-certified weak drift certificate for the registered families.

    Cauchy(alpha): F = (1+|x|^2)^k with k = 1 + alpha/4 by default and
    dissipation c/(1+|x|^2); Subbotin(alpha): F = exp(gamma |x|^alpha) with
    dissipation c |x|^{2(alpha-1)}.  The dissipation constant is fixed by
    grid minimization with a (1 - safety) relative margin.
    """
    if grid is None:
        grid = measure.verification_grid(DEFAULT_GRID)
    x = np.asarray(grid, dtype=float)
    r = np.abs(x)
    if measure.kind == "cauchy":
        alpha = measure.params["alpha"]
        if k is None:
            k = 1.0 + alpha / 4.0
        if not 0.0 < k < 1.0 + alpha / 2.0:
            raise BadParameter("admissible exponents need k < 1 + alpha/2")
        F = _cauchy_F(k)
        # drift ratio is negative outside |x| = 1/sqrt(alpha+2-2k)
        x_zero = 1.0 / math.sqrt(alpha + 2.0 - 2.0 * k)
        K = 2.0 * x_zero
        far = r >= K
        lhs = _lv_over(measure, F, x[far]) / F.value(x[far])
        c = safety * float(np.min(-lhs * (1.0 + x[far] ** 2)))
        if c <= 0:
            raise FarFieldViolated("no positive dissipation constant on the far grid")
        phi = _inverse_quadratic_phi(c)
    elif measure.kind == "subbotin":
        alpha = measure.params["alpha"]
        if not 0.0 < gamma < 1.0:
            raise BadParameter("subbotin drift needs gamma in (0, 1)")
        F = _subbotin_F(gamma, alpha)
        K = 1.0
        far = r >= K
        p = 2.0 * (alpha - 1.0)
        lhs = _lv_over(measure, F, x[far]) / F.value(x[far])
        c = safety * float(np.min(-lhs * np.abs(x[far]) ** (-p)))
        if c <= 0:
            raise FarFieldViolated("no positive dissipation constant on the far grid")
        phi = _power_phi(c, p)
    else:
        raise BadParameter(f"no standard certificate for kind {measure.kind!r}")
    cert = _tight_ball_constant(F, phi, K, measure, x)
    return replace(cert, provenance=f"standard-weak[{measure.kind}]")


def cauchy_phi_certificate(measure: Measure, k: float, eps: float,
                           grid=None) -> LyapunovCertificate:
    """phi-variant certificate for Cauchy measures:

      F = (1+|x|^2)^{(k/2)+1},  phi(u) = eps (k+2) u^{k/(k+2)},
      R = sqrt((d+eps)/(alpha-k-eps)),
      b = (k+2) ((d+alpha-k) + eps (1+R^2)^{k/2}).
    """
    if measure.kind != "cauchy":
        raise BadParameter("phi-certificate builder covers Cauchy measures")
    alpha = measure.params["alpha"]
    d = measure.d
    if not (0.0 < k < min(2.0, alpha)):
        raise BadParameter("need 0 < k < min(2, alpha)")
    if not (0.0 < eps < alpha - k):
        raise BadParameter("need 0 < eps < alpha - k")
    m = k / 2.0 + 1.0
    F = _cauchy_F(m)
    R = math.sqrt((d + eps) / (alpha - k - eps))
    b = (k + 2.0) * ((d + alpha - k) + eps * (1.0 + R * R) ** (k / 2.0))
    phi = PhiFunction(coef=eps * (k + 2.0), expo=k / (k + 2.0))
    cert = LyapunovCertificate(F=F, variant="phi", b=b, R=R, phi_of_u=phi,
                               provenance=f"cauchy-phi[k={k},eps={eps}]")
    rep = verify_certificate(cert, measure, grid=grid)
    return replace(cert, report=rep)


def cauchy_weighted_drift(measure: Measure, U: Optional[Potential] = None,
                          theta_prime: Optional[float] = None,
                          grid=None) -> WeightedDriftReport:
    """Weighted drift condition for Cauchy measures with F = omega^2 = 1+|x|^2.

    The ball radius solves 1 - 1/(1+(R-1)^2) = 1/(2(beta-1)) with
    beta = (alpha+d)/2 > 3/2; theta is fixed by grid minimization with 10%
    headroom and b = (2+theta) omega^2(R).  An optional perturbation U adds
    the side condition -omega^2 grad U . grad F <= theta' F.
    """
    if measure.kind != "cauchy":
        raise BadParameter("weighted drift builder covers Cauchy measures")
    alpha, d = measure.params["alpha"], measure.d
    beta = 0.5 * (alpha + d)
    if beta <= 1.5:
        raise BadParameter("weighted drift construction needs (alpha+d)/2 > 3/2")
    if grid is None:
        grid = measure.verification_grid(DEFAULT_GRID)
    x = np.asarray(grid, dtype=float)
    R = 1.0 + math.sqrt(1.0 / (2.0 * beta - 3.0))
    omega = FuncField(
        f=lambda t: np.sqrt(1.0 + t * t),
        df=lambda t: t / np.sqrt(1.0 + t * t),
        d2f=lambda t: (1.0 + t * t) ** -1.5,
        name="sqrt(1+x^2)",
    )
    F = _cauchy_F(1.0)
    far = np.abs(x) > R
    gen = WeightedGenerator(measure.potential, omega, measure.d)
    ratio = -gen.apply(F, x[far]) / F.value(x[far])
    theta = 0.9 * float(np.min(ratio))
    if theta <= 0:
        raise FarFieldViolated("no positive theta on the far grid")
    b = (2.0 + theta) * (1.0 + R * R)
    return weighted_lyapunov_check(omega, measure, F, theta, b, R, U=U,
                                   theta_prime=theta_prime, grid=x)
