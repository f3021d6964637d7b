import json

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from apfix import fixedpoint as fp
from apfix import model as mdl
from apfix.builtin import constant_model
from apfix.errors import DomainError, GridError, SandwichViolation
from apfix.grid import GridFunction

from conftest import equilibrium, small_model


def test_phi_gamma_examples():
    assert fp.phi_gamma(1.0, 4.0, 1.1, 0.5) == 1.0
    g = 4.0 / mdl.compute_B(4.0, 1.1, 0.5)
    assert g == pytest.approx(0.049295, abs=1e-6)
    assert fp.phi_gamma(g, 4.0, 1.1, 0.5) > g
    assert fp.phi_gamma(0.3, 1e-30, 1.1, 0.5) == pytest.approx(0.3 ** 1.1, rel=1e-9)
    with pytest.raises(DomainError):
        fp.phi_gamma(0.0, 4.0, 1.1, 0.5)


def test_theta_gamma_examples():
    assert fp.theta_gamma(1.0, 1.3, 1.1, 1.2) == 1.0
    phi = 0.5 ** 1.1 * (1 + 1.3 ** 1.2) / (1 + 0.5 ** 1.2 * 1.3 ** 1.2)
    assert fp.theta_gamma(0.5, 1.3, 1.1, 1.2) == pytest.approx(min(phi, 1.0), rel=1e-14)
    # phi > 1 gets clamped
    assert fp.phi_gamma(1.5, 1.3, 1.1, 1.2) > 1
    assert fp.theta_gamma(1.5, 1.3, 1.1, 1.2) == 1.0


def test_M_gamma_examples():
    assert fp.M_gamma(1.0, 4.0, 1.1, 0.5) == 0.0
    assert fp.gamma_max(4.0, 1.1, 0.5) == pytest.approx(4.0 / mdl.compute_B(4.0, 1.1, 0.5), rel=1e-12)
    gmax = fp.gamma_max(4.0, 1.1, 0.5)
    for g in np.linspace(gmax, 1, 50, endpoint=False)[1:]:
        assert fp.M_gamma(g, 4.0, 1.1, 0.5) > 0


@given(st.floats(1.02, 2.0), st.floats(0.05, 1.0), st.floats(1.05, 10.0), st.floats(0.0, 1.0))
@settings(max_examples=200)
def test_phi_above_gamma(m, dn_frac, ratio, g):
    # bracket regime m - 1 < n <= m, A above the threshold
    n = m - 1 + dn_frac
    A = mdl.threshold_A(m, n) * ratio
    B = mdl.compute_B(A, m, n)
    gamma = A / B + g * (1 - A / B)
    assume(gamma < 1 - 1e-9)
    assert fp.phi_gamma(gamma, A, m, n) > gamma


def test_lambda_of():
    u = GridFunction.constant(4.0, 0.0, 0.1, 10)
    v = GridFunction.constant(81.0, 0.0, 0.1, 10)
    assert fp.lambda_of(u, v) == pytest.approx(4 / 81)
    assert fp.lambda_of(v, v) == 1.0
    assert fp.lambda_of(v, u) == 1.0
    with pytest.raises(GridError):
        fp.lambda_of(u, GridFunction.constant(81.0, 0.0, 0.1, 11))


def test_iterate_identity_zero_steps():
    u = GridFunction.constant(2.0, 0.0, 0.5, 5)
    x, trace = fp.iterate(lambda a, b: a, u, u)
    assert trace.iterations == 0 and trace.converged
    assert np.array_equal(x.values, u.values)


def test_iterate_rejects_bad_bracket():
    op = lambda a, b: a.with_values(np.full(len(a), 3.0))
    u = GridFunction.constant(1.0, 0.0, 0.5, 5)
    v = GridFunction.constant(2.0, 0.0, 0.5, 5)
    with pytest.raises(SandwichViolation) as err:
        fp.iterate(op, u, v)
    assert err.value.excess == pytest.approx(1.0)
    with pytest.raises(SandwichViolation):
        fp.iterate(op, v, u)


def test_iterate_max_iter():
    op = lambda a, b: a.with_values(0.5 * (a.values + 1.0))
    u = GridFunction.constant(0.0, 0.0, 0.5, 5)
    v = GridFunction.constant(2.0, 0.0, 0.5, 5)
    x, trace = fp.iterate(op, u, v, gap_tol=1e-12, max_iter=3)
    assert not trace.converged and trace.iterations == 3
    x, trace = fp.iterate(op, u, v, gap_tol=1e-12)
    assert trace.converged and np.allclose(x.values, 1.0)


def test_constant_instance_matches_bisection():
    p = constant_model(3.0, 1.0, 1.1, 0.5)
    res = fp.solve(p, 4.0)
    c = equilibrium([(1.0, 3.0)], 1.0, 1.1, 0.5, 4.0, 81.0)
    assert c == pytest.approx(6.990440552490067, abs=1e-12)
    assert res.trace.converged
    assert np.max(np.abs(res.x.values - c)) <= 1e-6


def _small_solve(d, gap_tol=1e-5):
    m = d["m"]
    n = m - 1 + d["frac"] * (1.0 + d["extra"])
    A = mdl.threshold_A(m, n) * d["ratio"]
    if n > m:
        A = min(A, mdl.compute_V(m, n))
    # place the lower rate r0/(1+beta) just above the left end of the chain
    r0 = mdl.lower_ratio(A, m, n) * (1 + d["beta"]) * (1 + d["slack"])
    p = small_model(m, n, r0, d["a"], d["beta"], nu=2.0, tau=d["tau"])
    try:
        rep = mdl.check(p, A)
    except mdl.RegimeUnsupported:
        rep = None
    assume(rep is not None and rep.applicable)
    s = fp.SolveSettings(gap_tol=gap_tol, quad_dt=0.05, window=(0.0, 5.0), max_iter=400)
    op, q, B, _ = fp.build_operator(p, A, s)
    u0, v0 = op.grid_like(A), op.grid_like(B)
    return fp.iterate(op, u0, v0, gap_tol, s.max_iter, check_tol=1e-9, keep_iterates=True)


small_models = st.fixed_dictionaries({
    "m": st.floats(1.05, 1.5),
    "frac": st.floats(0.1, 1.0),
    "extra": st.sampled_from([0.0, 0.0, 0.3]),
    "slack": st.floats(0.0, 0.2),
    "a": st.floats(0.0, 0.3),
    "beta": st.floats(0.0, 0.3),
    "tau": st.floats(0.3, 2.0),
    "ratio": st.floats(1.5, 20.0),
})


@given(small_models)
@settings(max_examples=100, deadline=None)
def test_sandwich_chain_and_lambda(d):
    _, trace = _small_solve(d)
    tol = 1e-9
    its = trace.iterates
    for (u, v), (u1, v1) in zip(its, its[1:]):
        assert np.all(u.values <= u1.values + tol)
        assert np.all(u1.values <= v1.values + tol)
        assert np.all(v1.values <= v.values + tol)
    lams = [s.lambda_n for s in trace.steps]
    lam0 = its[0][0].inf / its[0][1].sup
    assert all(b >= a - 1e-12 for a, b in zip(lams, lams[1:]))
    assert all(lam0 - 1e-12 <= lam <= 1.0 for lam in lams)


@pytest.fixture(scope="module")
def slack_model():
    # constant + bounded terms with slack in both ends of the chain
    p = small_model(1.1, 0.5, 3.0, a=0.2, beta=0.1, nu=3.0)
    A = 4.0
    s = fp.SolveSettings(gap_tol=1e-7, quad_dt=0.01, window=(0.0, 10.0))
    return p, A, s


def test_uniqueness_from_shrunk_bracket(slack_model):
    p, A, s = slack_model
    assert mdl.check(p, A).applicable
    op, q, B, _ = fp.build_operator(p, A, s)
    x1, t1 = fp.iterate(op, op.grid_like(A), op.grid_like(B), s.gap_tol)
    x2, t2 = fp.iterate(op, op.grid_like(1.05 * A), op.grid_like(0.95 * B), s.gap_tol)
    assert t1.converged and t2.converged
    assert np.max(np.abs(x1.values - x2.values)) <= 10 * s.gap_tol


def test_residual_at_termination(slack_model):
    p, A, s = slack_model
    res = fp.solve(p, A, s)
    assert res.residual() <= 2 * s.gap_tol
    assert res.x.inf >= A - 1e-9 and res.x.sup <= res.upper


def test_solve_refuses_below_threshold():
    p = constant_model(3.0, 1.0, 1.1, 0.5)
    with pytest.raises(mdl.HypothesisViolation):
        fp.solve(p, 0.05)


def test_trace_serialisation(tmp_path):
    p = constant_model(3.0, 1.0, 1.1, 0.5)
    res = fp.solve(p, 4.0, fp.SolveSettings(quad_dt=0.02, window=(0.0, 2.0)))
    d = json.loads(res.trace.to_json())
    assert d["converged"] and len(d["steps"]) == res.trace.iterations + 1
    path = tmp_path / "trace.csv"
    res.trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("n,lambda_n,gap")
    assert len(lines) == len(d["steps"]) + 1
