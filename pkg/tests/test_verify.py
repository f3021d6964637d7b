import math
import warnings

import numpy as np
import pytest

from apfix import model as mdl
from apfix.apexpr import Const
from apfix.builtin import constant_model, example
from apfix.errors import InsufficientHistory, PositivityLoss
from apfix.grid import GridFunction
from apfix.model import ModelParams, Term
from apfix.operators import flux
from apfix.verify import dde_integrate, ode_residual, ode_residual_plain, voc_check, verify_solution

from conftest import equilibrium

C_STAR = equilibrium([(1.0, 3.0)], 1.0, 1.1, 0.5, 4.0, 81.0)


def test_dde_stays_at_equilibrium():
    p = constant_model(3.0, 1.0, 1.1, 0.5)
    hist = GridFunction.constant(C_STAR, -2.0, 0.01, 201)
    for interp in ("linear", "hermite"):
        traj = dde_integrate(p, hist, (0.0, 10.0), 0.01, interp)
        assert np.max(np.abs(traj.values - C_STAR)) <= 1e-8


def test_dde_zero_production_decays():
    # built directly: r = 0 is outside the standing hypotheses
    p = ModelParams(1.1, 0.5, (Term(Const(0.0), Const(1.0)),), Const(1.0))
    hist = GridFunction.constant(1.0, -2.0, 0.01, 201)
    traj = dde_integrate(p, hist, (0.0, 5.0), 0.01)
    assert np.max(np.abs(traj.values - np.exp(-traj.times))) <= 1e-10


def test_dde_fourth_order_off_equilibrium():
    # delay is a multiple of every step, so breaking points sit on nodes
    p = constant_model(3.0, 1.0, 1.1, 0.5, tau=1.0)
    hist = GridFunction.constant(8.0, -2.0, 1e-3, 2001)
    ref = dde_integrate(p, hist, (0.0, 5.0), 1 / 2560, "hermite")
    errs = [abs(dde_integrate(p, hist, (0.0, 5.0), h, "hermite").values[-1] - ref.values[-1])
            for h in (0.1, 0.05, 0.025)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(13.0 <= r <= 19.0 for r in ratios), ratios


def test_dde_linear_interpolation_is_second_order():
    p = constant_model(3.0, 1.0, 1.1, 0.5, tau=1.0)
    hist = GridFunction.constant(8.0, -2.0, 1e-3, 2001)
    ref = dde_integrate(p, hist, (0.0, 5.0), 1 / 2560)
    errs = [abs(dde_integrate(p, hist, (0.0, 5.0), h).values[-1] - ref.values[-1]) for h in (0.1, 0.05)]
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_dde_history_and_positivity():
    p = constant_model(3.0, 1.0, 1.1, 0.5)
    with pytest.raises(InsufficientHistory):
        dde_integrate(p, GridFunction.constant(1.0, -0.5, 0.01, 51), (0.0, 1.0), 0.01)
    with pytest.raises(ValueError):
        dde_integrate(p, GridFunction.constant(1.0, -2.0, 0.01, 201), (0.0, 1.0), 0.01, "cubic")
    # negative production (outside the hypotheses) drives the state through zero
    q = ModelParams(1.1, 0.5, (Term(Const(-5.0), Const(1.0)),), Const(1.0))
    with pytest.warns(PositivityLoss):
        dde_integrate(q, GridFunction.constant(1.0, -2.0, 0.01, 201), (0.0, 1.0), 0.01)


def test_ode_residual_constant_equilibrium():
    p = constant_model(3.0, 1.0, 1.1, 0.5)
    x = GridFunction.constant(C_STAR, -2.0, 0.01, 601)
    # the fitted difference carries a Simpson-type O(dt^4) weight error
    assert ode_residual(p, x) <= C_STAR * x.dt ** 4
    assert ode_residual_plain(p, x) <= 1e-12


def test_ode_residual_not_a_solution():
    p, A = example(1)
    x = GridFunction.constant(A, -8.0, 1e-3, 12001)
    # x' = 0, so the residual at t is |sum r(t) flux(A) - b(t) A| >= sum r- flux(A) - b(t) A
    t = x.times[x.times > 0]
    margin = sum(rb.inf_est for rb in p.r_bounds) * flux(A, p.m, p.n) - A * np.min(p.b.eval(t))
    assert margin > 9.0
    assert ode_residual(p, x) >= margin - 1e-9


def test_voc_trivial_cases():
    p = constant_model(3.0, 1.0, 1.1, 0.5)
    x = GridFunction.constant(C_STAR, -2.0, 0.01, 601)
    assert voc_check(p, x, 1.0, 1.0) == 0.0
    assert voc_check(p, x, 0.0, 3.5) <= C_STAR * x.dt ** 4
    with pytest.raises(ValueError):
        voc_check(p, x, 2.0, 1.0)


def test_verify_constant_solution():
    p = constant_model(3.0, 1.0, 1.1, 0.5)
    x = GridFunction.constant(C_STAR, 0.0, 0.01, 4001)
    rep, traj = verify_solution(p, x, horizon=10.0)
    assert rep.sup_ode_residual <= C_STAR * x.dt ** 4
    assert rep.sup_voc_residual <= C_STAR * x.dt ** 4
    assert rep.sup_drift <= 1e-8 and not rep.positivity_lost
    assert math.isfinite(rep.trajectory_min) and rep.sample_count > 0


def test_ex2_solution_checks(solved_ex2, ex2):
    p, A = ex2
    with warnings.catch_warnings():
        warnings.simplefilter("error", PositivityLoss)
        rep, traj = verify_solution(p, solved_ex2.x)
    assert rep.sup_ode_residual <= 1e-3
    assert rep.sup_voc_residual <= 1e-3
    V = mdl.compute_V(p.m, p.n)
    assert traj.inf >= A and traj.sup <= V
