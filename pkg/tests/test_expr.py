"""Potential expression parser and dual-number derivatives."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiq.autodiff import Dual2
from fiq.errors import ExprDomainError, ExprSyntaxError
from fiq.expr import PotentialExpr, parse, unparse


def test_basic_values():
    e = PotentialExpr.parse("0.5*ln(1+x^2)")
    assert e.value(0.0) == pytest.approx(0.0)
    assert e.value(1.0) == pytest.approx(0.5 * math.log(2))


def test_abs_power():
    e = PotentialExpr.parse("(1+|x|)^0.5")
    assert e.value(3.0) == pytest.approx(2.0)
    assert e.value(-3.0) == pytest.approx(2.0)


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as ei:
        parse("ln(x")
    assert ei.value.offset == 4


def test_unknown_key_and_trailing():
    with pytest.raises(ExprSyntaxError):
        parse("foo(x)")
    with pytest.raises(ExprSyntaxError):
        parse("1 + ")
    with pytest.raises(ExprSyntaxError):
        parse("x 1")


def test_domain_error_at_eval():
    e = PotentialExpr.parse("ln(x)")
    with pytest.raises(ExprDomainError):
        e.value(-1.0)
    e2 = PotentialExpr.parse("sqrt(x)")
    with pytest.raises(ExprDomainError):
        e2.value(-2.0)


def test_unary_minus_literal():
    e = PotentialExpr.parse("-0.5*ln(1+x^2)")
    assert e.value(1.0) == pytest.approx(-0.5 * math.log(2))
    assert PotentialExpr.parse("x^-2.0").value(2.0) == pytest.approx(0.25)


def test_parse_print_parse_idempotent():
    for src in ["0.5*ln(1+x^2)", "(1+|x|)^0.5", "x*x - exp(x/3)", "-2*x + 4/(1+x)"]:
        ast = parse(src)
        assert parse(unparse(ast)) == ast


def test_derivatives_match_finite_differences():
    e = PotentialExpr.parse("0.5*ln(1+x^2) + exp(x/4) - (1+|x|)^0.5")
    xs = np.linspace(0.4, 5.0, 50)
    h = 1e-5
    d1 = e.deriv(xs)
    fd1 = (e.value(xs + h) - e.value(xs - h)) / (2 * h)
    assert np.max(np.abs(d1 - fd1) / np.maximum(1e-8, np.abs(d1))) < 1e-6
    h2 = 1e-4  # second differences need a larger step against roundoff
    d2 = e.second(xs)
    fd2 = (e.value(xs + h2) - 2 * e.value(xs) + e.value(xs - h2)) / h2**2
    assert np.max(np.abs(d2 - fd2) / np.maximum(1e-6, np.abs(d2))) < 1e-5


def test_dual_second_derivative_exact():
    x = Dual2.variable(np.array([2.0]))
    y = x * x * x
    assert y.v[0] == pytest.approx(8.0)
    assert y.d1[0] == pytest.approx(12.0)
    assert y.d2[0] == pytest.approx(12.0)


# --- fuzzing: well-formed expressions never crash the parser/evaluator ---

def _random_expr(rng, depth=0):
    if depth > 4 or rng.random() < 0.3:
        return rng.choice(["x", "|x|", f"{rng.uniform(0.1, 3):.3f}"])
    k = rng.randrange(6)
    a = _random_expr(rng, depth + 1)
    b = _random_expr(rng, depth + 1)
    if k == 0:
        return f"({a}+{b})"
    if k == 1:
        return f"({a}-{b})"
    if k == 2:
        return f"({a}*{b})"
    if k == 3:
        return f"({a}/(1+({b})^2.0))"
    if k == 4:
        return f"exp(0-(({a})^2.0))"
    return f"ln(1+({a})^2.0)"


def test_fuzz_wellformed_expressions():
    rng = random.Random(20240817)
    xs = np.linspace(-3, 3, 7)
    for _ in range(1000):
        src = _random_expr(rng)
        e = PotentialExpr.parse(src)
        vals = e.value(xs)
        assert np.all(np.isfinite(np.asarray(vals, dtype=float)))
        assert parse(unparse(e.ast)) == e.ast


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="x|()+-*/^.0123456789lnexpsqrtabs ", max_size=40))
def test_fuzz_malformed_never_crashes(src):
    try:
        e = PotentialExpr.parse(src)
        try:
            e.value(np.array([0.5, 1.5]))
        except (ExprDomainError, ZeroDivisionError, OverflowError, FloatingPointError):
            pass
    except ExprSyntaxError:
        pass
