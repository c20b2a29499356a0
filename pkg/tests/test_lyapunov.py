"""Generator algebra and drift-certificate verification."""

import math

import numpy as np
import pytest

from fiq import lyapunov, measures
from fiq.errors import BadParameter, FarFieldViolated, PhiUNotPositive
from fiq.fields import ConstField, FuncField, Potential
from fiq.lyapunov import (
    LyapunovCertificate,
    WeightedGenerator,
    apply_generator,
    normalize_far_field,
    perturbed_drift,
    verify_certificate,
    weighted_lyapunov_check,
)

IDENTITY = FuncField(lambda x: x, lambda x: np.ones_like(x), lambda x: np.zeros_like(x),
                     name="x")
CONST1 = FuncField(lambda x: np.ones_like(x), lambda x: np.zeros_like(x),
                   lambda x: np.zeros_like(x), name="1")


def sqrt_weight():
    return FuncField(lambda x: np.sqrt(1 + x * x), lambda x: x / np.sqrt(1 + x * x),
                     lambda x: (1 + x * x) ** -1.5, name="sqrt(1+x^2)")


def test_ou_generator_on_identity():
    g = WeightedGenerator(measures.gaussian(1).potential, None, 1)
    assert g.apply(IDENTITY, np.array([2.0]))[0] == pytest.approx(-2.0, abs=1e-12)


def test_weighted_cauchy_drift_field():
    # alpha = 4, d = 1, omega^2 = 1+x^2: drift = 2x - 5x = -3x; on f = x the
    # generator equals the drift
    m = measures.cauchy(4.0, 1)
    g = WeightedGenerator(m.potential, sqrt_weight(), 1)
    x = np.array([1.0])
    assert g.apply(IDENTITY, x)[0] == pytest.approx(-3.0, rel=1e-12)
    # cross-check against dual-number autodiff of the same fields
    from fiq.expr import PotentialExpr
    from fiq.fields import ExprFieldAdapter

    f = ExprFieldAdapter(PotentialExpr.parse("x"))
    assert g.apply(f, x)[0] == pytest.approx(-3.0, rel=1e-12)


def test_generator_constant_function():
    m = measures.cauchy(2.0, 1)
    g = WeightedGenerator(m.potential, sqrt_weight(), 1)
    assert np.allclose(g.apply(CONST1, np.linspace(-3, 3, 7)), 0.0)


def test_apply_generator_accepts_measure():
    m = measures.gaussian(1)
    assert apply_generator(m, IDENTITY, np.array([2.0]))[0] == pytest.approx(-2.0)


def test_unweighted_equals_weight_one():
    m = measures.cauchy(3.0, 1)
    f = FuncField(lambda x: np.arctan(x), lambda x: 1 / (1 + x * x),
                  lambda x: -2 * x / (1 + x * x) ** 2, name="arctan")
    xs = np.linspace(-5, 5, 21)
    a = WeightedGenerator(m.potential, None, 1).apply(f, xs)
    b = WeightedGenerator(m.potential, ConstField(1.0), 1).apply(f, xs)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_symmetry_integration_by_parts():
    # int f L^w g dmu = -int f' g' w^2 dmu for rapidly decaying test functions
    rng = np.random.default_rng(5)
    m = measures.cauchy(4.0, 1)
    w = sqrt_weight()
    gen = WeightedGenerator(m.potential, w, 1)
    rule = m.rule
    for _ in range(10):
        a, bshift = rng.uniform(0.5, 2.0), rng.uniform(-1.5, 1.5)
        c, dshift = rng.uniform(0.5, 2.0), rng.uniform(-1.5, 1.5)
        f = FuncField(lambda x, a=a, b=bshift: np.exp(-a * (x - b) ** 2),
                      lambda x, a=a, b=bshift: -2 * a * (x - b) * np.exp(-a * (x - b) ** 2),
                      lambda x, a=a, b=bshift: (-2 * a + 4 * a * a * (x - b) ** 2) * np.exp(-a * (x - b) ** 2))
        g = FuncField(lambda x, a=c, b=dshift: np.exp(-a * (x - b) ** 2),
                      lambda x, a=c, b=dshift: -2 * a * (x - b) * np.exp(-a * (x - b) ** 2),
                      lambda x, a=c, b=dshift: (-2 * a + 4 * a * a * (x - b) ** 2) * np.exp(-a * (x - b) ** 2))
        lhs = rule.integrate(lambda x: f.value(x) * gen.apply(g, x) * m.density(x))
        rhs = -rule.integrate(lambda x: f.deriv(x) * g.deriv(x) * w.value(x) ** 2 * m.density(x))
        assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-9)


# --- certificates ------------------------------------------------------

def test_cauchy_weak_certificate_verified():
    m = measures.cauchy(2.0, 1)
    cert = lyapunov.standard_weak_certificate(m)
    assert cert.report.verified
    assert cert.b >= 0 and cert.R > 0
    # dissipation has the expected inverse-quadratic profile and is positive
    assert cert.phi.value(np.array([10.0]))[0] > 0


def test_subbotin_weak_certificate_verified():
    m = measures.subbotin(0.5, 1)
    cert = lyapunov.standard_weak_certificate(m)
    assert cert.report.verified


def test_trivial_certificate_fails_for_positive_phi():
    m = measures.cauchy(2.0, 1)
    phi = FuncField(lambda x: np.full_like(x, 0.5), lambda x: np.zeros_like(x),
                    lambda x: np.zeros_like(x), name="0.5")
    cert = LyapunovCertificate(F=CONST1, variant="weak", b=0.0, R=1.0, phi=phi)
    rep = verify_certificate(cert, m)
    assert not rep.verified  # L F = 0 cannot dominate -phi < 0 outside the ball


def test_verification_monotone_in_b():
    m = measures.cauchy(2.0, 1)
    cert = lyapunov.standard_weak_certificate(m)
    worse = LyapunovCertificate(F=cert.F, variant="weak", b=cert.b * 3, R=cert.R,
                                phi=cert.phi)
    assert verify_certificate(worse, m).verified


def test_normalize_far_field_gaussian():
    # F = exp(x^2/4): L F/F = (1/2 + x^2/4) - x^2/2 = 1/2 - x^2/4 < 0 for |x| > 2
    m = measures.gaussian(1)
    F = FuncField(lambda x: np.exp(x * x / 4), lambda x: x / 2 * np.exp(x * x / 4),
                  lambda x: (0.5 + x * x / 4) * np.exp(x * x / 4), name="exp(x^2/4)")
    phi = FuncField(lambda x: x * x / 8, lambda x: x / 4, lambda x: np.full_like(x, 0.25),
                    name="x^2/8")
    K = 2.5
    cert = normalize_far_field(F, phi, K, m)
    assert cert.report.verified
    assert cert.R == K
    # b = 2M with M the ball bound of |L F / F| and |phi|
    x = m.verification_grid()
    ball = np.abs(x) <= K
    lhs = lyapunov.apply_generator(m, F, x[ball]) / F.value(x[ball])
    M = max(np.max(np.abs(lhs)), np.max(np.abs(phi.value(x[ball]))))
    assert cert.b == pytest.approx(2 * M, rel=1e-12)


def test_normalize_far_field_phi_zero():
    m = measures.gaussian(1)
    F = FuncField(lambda x: np.exp(x * x / 4), lambda x: x / 2 * np.exp(x * x / 4),
                  lambda x: (0.5 + x * x / 4) * np.exp(x * x / 4), name="exp(x^2/4)")
    zero = FuncField(lambda x: np.zeros_like(x), lambda x: np.zeros_like(x),
                     lambda x: np.zeros_like(x), name="0")
    cert = normalize_far_field(F, zero, 2.5, m)
    assert cert.report.verified


def test_normalize_far_field_bad_radius():
    m = measures.gaussian(1)
    with pytest.raises(BadParameter):
        normalize_far_field(CONST1, CONST1, 1e9, m)


def test_far_field_violated():
    m = measures.gaussian(1)
    phi = FuncField(lambda x: np.full_like(x, 123.0), lambda x: np.zeros_like(x),
                    lambda x: np.zeros_like(x), name="123")
    F = FuncField(lambda x: np.exp(x * x / 4), lambda x: x / 2 * np.exp(x * x / 4),
                  lambda x: (0.5 + x * x / 4) * np.exp(x * x / 4), name="exp(x^2/4)")
    with pytest.raises(FarFieldViolated):
        normalize_far_field(F, phi, 2.5, m)


# --- perturbed dissipation ----------------------------------------------

def test_perturbed_drift_zero_U():
    m = measures.cauchy(2.0, 1)
    cert = lyapunov.standard_weak_certificate(m)
    U = Potential(ConstField(0.0), d=1, radial=False, exact_lower=0.0, name="0")
    phi_U, rep = perturbed_drift(cert, U, m)
    xs = np.linspace(0.1, 30.0, 50)
    np.testing.assert_allclose(phi_U.value(xs), cert.phi.value(xs), atol=1e-14)
    assert rep.status == "verified"


def test_perturbed_drift_log_potential_form():
    # U = (a'/2) ln(1+x^2): phi_U = (c + 2k <grad U, x>) / (1+x^2) shape
    m = measures.cauchy(2.0, 1)
    k = 1.5
    cert = lyapunov.standard_weak_certificate(m, k=k)
    ap = 1.0
    U = Potential(FuncField(lambda x: 0.5 * ap * np.log1p(x * x),
                            lambda x: ap * x / (1 + x * x),
                            lambda x: ap * (1 - x * x) / (1 + x * x) ** 2, name="U"),
                  d=1, radial=True, exact_lower=0.0, monotone_radial=True)
    phi_U, _ = perturbed_drift(cert, U, m)
    xs = np.linspace(0.5, 20, 40)
    c = cert.phi.value(xs) * (1 + xs * xs)  # the certified constant
    expected = (c + 2 * k * ap * xs * xs / (1 + xs * xs)) / (1 + xs * xs)
    np.testing.assert_allclose(phi_U.value(xs), expected, rtol=1e-10)


def test_perturbed_drift_violation_detected():
    m = measures.cauchy(2.0, 1)
    cert = lyapunov.standard_weak_certificate(m)
    # <grad U, x> pushed far below -phi (1+x^2)/(2k): strong inward pull
    U = Potential(FuncField(lambda x: -10.0 * np.log1p(x * x),
                            lambda x: -20.0 * x / (1 + x * x),
                            lambda x: -20.0 * (1 - x * x) / (1 + x * x) ** 2, name="U"),
                  d=1, radial=True, name="bad")
    with pytest.raises(PhiUNotPositive) as ei:
        perturbed_drift(cert, U, m)
    assert ei.value.witness is not None


# --- weighted drift ------------------------------------------------------

def test_weighted_cauchy_drift_verified():
    m = measures.cauchy(4.0, 1)
    rep = lyapunov.cauchy_weighted_drift(m)
    assert rep.verified
    assert rep.theta > 0
    beta = 0.5 * (4.0 + 1.0)
    R = 1.0 + math.sqrt(1.0 / (2 * beta - 3.0))
    assert rep.R == pytest.approx(R, rel=1e-12)
    assert rep.b == pytest.approx((2.0 + rep.theta) * (1.0 + R * R), rel=1e-12)


def test_weighted_drift_with_decreasing_log_perturbation():
    m = measures.cauchy(4.0, 1)
    base = lyapunov.cauchy_weighted_drift(m)
    theta_p = 0.5 * base.theta
    bcoef = 0.9 * theta_p / 2.0  # side condition -<x, grad U> <= theta'/2
    U = Potential(FuncField(lambda x: -bcoef * np.log1p(np.abs(x)),
                            lambda x: -bcoef * np.sign(x) / (1 + np.abs(x)),
                            lambda x: bcoef / (1 + np.abs(x)) ** 2, name="U"),
                  d=1, radial=True, name="neg-log")
    rep = lyapunov.cauchy_weighted_drift(m, U=U, theta_prime=theta_p)
    assert rep.verified
    assert rep.theta_prime < rep.theta


def test_weighted_drift_side_condition_failure():
    m = measures.cauchy(4.0, 1)
    base = lyapunov.cauchy_weighted_drift(m)
    theta_p = 0.5 * base.theta
    bad = 5.0 * theta_p  # violates -<x, grad U> <= theta'/2
    U = Potential(FuncField(lambda x: -bad * np.log1p(np.abs(x)),
                            lambda x: -bad * np.sign(x) / (1 + np.abs(x)),
                            lambda x: bad / (1 + np.abs(x)) ** 2, name="U"),
                  d=1, radial=True, name="too-strong")
    rep = lyapunov.cauchy_weighted_drift(m, U=U, theta_prime=theta_p)
    assert not rep.verified


def test_weighted_drift_subbotin_far_field():
    # F = exp(gamma |x|^alpha) with the subbotin optimal weight; verified on
    # a far-field grid with the tight ball constant
    alpha, gamma = 0.5, 0.5
    m = measures.subbotin(alpha, 1)
    w2 = lambda x: 1.0 + (1.0 + np.abs(x)) ** (2 * (1 - alpha))
    omega = FuncField(lambda x: np.sqrt(w2(x)),
                      lambda x: (1 - alpha) * np.sign(x) * (1 + np.abs(x)) ** (1 - 2 * alpha) / np.sqrt(w2(x)),
                      lambda x: np.zeros_like(x), name="subbotin-weight")
    F = lyapunov._subbotin_F(gamma, alpha)
    x = m.verification_grid()
    far = np.abs(x) >= 1.0
    gen = WeightedGenerator(m.potential, omega, 1)
    ratio = -gen.apply(F, x[far]) / F.value(x[far])
    theta = 0.9 * float(np.min(ratio))
    assert theta > 0
    inside = ~far
    excess = gen.apply(F, x[inside]) + theta * F.value(x[inside])
    b = 1.05 * max(0.0, float(np.max(excess)))
    rep = weighted_lyapunov_check(omega, m, F, theta, b, 1.0)
    assert rep.verified
