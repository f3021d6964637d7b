import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from apfix import apexpr
from apfix.apexpr import Abs, Const, Exp, Prod, Sinusoid, Sum
from apfix.builtin import SQRT2, SQRT3, example_b
from apfix.errors import HypothesisViolation, UnsupportedCoefficient

B = example_b()
R1 = 0.5 * (Const(5.0) + Abs(Sinusoid(1.0, SQRT2)))
R2 = 0.25 * (Const(13.0) + 0.6 * Abs(Sinusoid(1.0, SQRT3, kind="sin")))


def test_eval_examples():
    assert apexpr.evaluate(B, 0.0) == pytest.approx(2.2, abs=1e-15)
    assert apexpr.evaluate(Const(5.0), 123.4) == 5.0
    assert apexpr.evaluate(R1, 0.0) == pytest.approx(3.0, abs=1e-15)


def test_eval_vectorised_matches_scalar():
    ts = np.linspace(-3, 7, 11)
    f = Prod((Exp(Sinusoid(0.3, 2.0)), Sum((Const(1.0), Abs(Sinusoid(2.0, 0.7, 0.4, "sin"))))))
    vec = f(ts)
    assert vec.shape == ts.shape
    for t, v in zip(ts, vec):
        assert apexpr.evaluate(f, t) == pytest.approx(v, rel=1e-15)


def test_sinusoid_rejects_zero_frequency():
    with pytest.raises(ValueError):
        Sinusoid(1.0, 0.0)
    with pytest.raises(ValueError):
        Sinusoid(1.0, math.inf)


def test_bounds_examples():
    bb = apexpr.estimate_bounds(B)
    assert (bb.inf_est, bb.sup_est) == pytest.approx((-0.2, 2.2), abs=1e-14)
    assert bb.certified
    c = apexpr.estimate_bounds(Const(5.0))
    assert (c.inf_est, c.sup_est) == (5.0, 5.0)
    r2 = apexpr.estimate_bounds(R2)
    assert (r2.inf_est, r2.sup_est) == pytest.approx((3.25, 3.4), abs=1e-14)


def test_bounds_sampled_for_two_frequencies():
    f = Sinusoid(1.0, 1.0) + Sinusoid(1.0, SQRT2)
    est = apexpr.estimate_bounds(f)
    assert not est.certified
    assert -2.0 <= est.inf_est < -1.9
    assert 1.9 < est.sup_est <= 2.0


def test_bounds_short_window_flag():
    f = Sinusoid(1.0, 1.0) + Sinusoid(1.0, 3.0)
    with pytest.warns(RuntimeWarning):
        est = apexpr.estimate_bounds(f, window=(0.0, 1.0), step=0.01)
    assert est.short_window


@given(st.floats(-50, 50))
@settings(max_examples=100)
def test_eval_within_bounds(t):
    for f in (B, R1, R2, 2.0 * Exp(Sinusoid(1.0, 1.0))):
        est = apexpr.estimate_bounds(f)
        v = apexpr.evaluate(f, t)
        assert est.inf_est - 1e-12 <= v <= est.sup_est + 1e-12


def test_mean_value():
    assert apexpr.mean_value(B) == 1.0
    assert apexpr.mean_value(Const(2.5)) == 2.5
    assert apexpr.mean_value(Abs(Sinusoid(1.0, 1.0)), T=2000.0) == pytest.approx(2 / math.pi, abs=1e-3)


def test_mean_of_zero_mean_sinusoid_numeric():
    # force the numeric path with a product of two nonconstant factors
    f = Prod((Sinusoid(1.0, 1.0), Const(1.0) + Sinusoid(0.0001, 7.0)))
    for T in (200.0, 2000.0):
        assert abs(apexpr.mean_value(f, T=T)) <= 2.0 / T


def test_antiderivative_examples():
    F = apexpr.antiderivative(B)
    ts = np.linspace(-2, 2, 9)
    assert np.allclose(F(ts), ts + 1.2 / 400 * np.sin(400 * ts), atol=1e-14)
    # against adaptive quadrature
    val, _ = quad(lambda u: apexpr.evaluate(B, u), 0.1, 0.7, limit=400)
    assert F(0.7) - F(0.1) == pytest.approx(val, abs=1e-10)
    G = apexpr.antiderivative(Const(3.0))
    assert G(2.0) == pytest.approx(6.0)
    assert apexpr.antiderivative(Abs(Sinusoid(1.0, SQRT2))) is None


@given(t=st.floats(-30, 30), h=st.floats(1e-4, 1e-2))
@settings(max_examples=100)
def test_antiderivative_finite_difference(t, h):
    f = Const(0.7) + Sinusoid(1.2, 3.0, 0.2) + 0.5 * Sinusoid(2.0, 0.5, kind="sin")
    F = apexpr.antiderivative(f)
    # |F(t+h) - F(t) - h f(t)| <= h^2/2 sup|f'|
    fprime_sup = 1.2 * 3.0 + 0.5 * 2.0 * 0.5
    assert abs(F(t + h) - F(t) - h * f(t)) <= 0.5 * h * h * fprime_sup + 1e-12


def test_oscillation_bound_examples():
    ob = apexpr.derive_oscillation_bound(B)
    assert ob.F_s == pytest.approx(math.exp(1.2 / 200), rel=1e-12)
    assert ob.b_star == Const(1.0) and ob.b_star_inf == 1.0
    ob = apexpr.derive_oscillation_bound(Const(3.0))
    assert ob.F_s == 1.0 and ob.b_star_inf == 3.0
    b = Const(2.0) + Sinusoid(0.5, 1.0, kind="sin")
    ob = apexpr.derive_oscillation_bound(b)
    assert ob.F_s == 1.0 and ob.b_star is b and ob.b_star_inf == pytest.approx(1.5)


def test_oscillation_bound_errors():
    with pytest.raises(HypothesisViolation):
        apexpr.derive_oscillation_bound(Const(-1.0) + Sinusoid(0.5, 1.0))
    with pytest.raises(UnsupportedCoefficient):
        apexpr.derive_oscillation_bound(Const(0.5) + Abs(Sinusoid(1.0, 1.0)) + Sinusoid(-2.0, 3.0))


def test_kernel_domination_random_pairs():
    ob = apexpr.derive_oscillation_bound(B)
    F = apexpr.antiderivative(B)
    rng = np.random.default_rng(7)
    s = rng.uniform(-40, 40, 10_000)
    t = s + rng.uniform(0, 30, 10_000)
    lhs = np.exp(-(F(t) - F(s)))
    rhs = ob.F_s * np.exp(-ob.b_star_inf * (t - s))
    assert np.all(lhs <= rhs * (1 + 1e-12))


def test_json_roundtrip():
    for f in (B, R1, R2, 2.0 * Exp(Sinusoid(1.0, 1.0, kind="sin"))):
        text = json.dumps(apexpr.to_json(f))
        g = apexpr.from_json(json.loads(text))
        ts = np.linspace(-5, 5, 17)
        assert np.array_equal(f(ts), g(ts))
    assert apexpr.from_json(2) == Const(2.0)
    doc = {"sum": [{"const": 1}, {"cos": {"amp": 1.2, "freq": 400, "phase": 0}}]}
    assert apexpr.evaluate(apexpr.from_json(doc), 0.0) == pytest.approx(2.2)
    with pytest.raises(ValueError):
        apexpr.from_json({"tan": 1})
