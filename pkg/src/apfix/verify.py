"""
Independent checks of a candidate solution against the differential form.

* ``ode_residual``: x' + b x - production, with x' from centered differences.
* ``voc_check``: the variation-of-constants identity on [t1, t], integrated
  with scipy's composite Simpson rule (not the solver's own quadrature).
* ``dde_integrate``: classical RK4 method of steps seeded with the candidate.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import InsufficientHistory, PositivityLoss
from .grid import GridFunction
from .model import ModelParams
from .operators import flux, kernel_exponent


@dataclass
class ResidualReport:
    sup_ode_residual: float
    sup_voc_residual: float
    drift_horizon: float
    sup_drift: float
    sample_count: int
    trajectory_min: float = math.nan
    trajectory_max: float = math.nan
    positivity_lost: bool = False

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def production(p: ModelParams, x: GridFunction, t: np.ndarray) -> np.ndarray:
    """sum_k lam_k r_k(t) flux(x(t - tau_k(t))) via linear interpolation of x."""
    out = np.zeros_like(t, dtype=float)
    for term in p.terms:
        lag = t - term.tau.eval(t)
        out += term.lam * term.r.eval(t) * flux(x(lag), p.m, p.n)
    return out


def _interior(p: ModelParams, x: GridFunction) -> np.ndarray:
    """Indices of interior nodes whose delayed lookups stay on the grid."""
    t = x.times
    ok = np.ones(t.size, dtype=bool)
    ok[0] = ok[-1] = False
    for term in p.terms:
        ok &= (t - term.tau.eval(t)) >= x.t0 - 1e-9 * x.dt
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        raise InsufficientHistory("no grid point has its delayed values inside the grid")
    return idx


def ode_residual(p: ModelParams, x: GridFunction) -> float:
    """sup over interior nodes of |x'(t) + b(t) x(t) - production(t)|.

    With P' = b, x' + b x is the derivative of y(s) = exp(P(s) - P(t)) x(s)
    at s = t.  It is estimated by the exponentially fitted centered difference
    (y(t+h) - y(t-h)) / int_{t-h}^{t+h} exp(P(s) - P(t)) ds, which is exact for
    equilibria of constant-coefficient models and stays accurate when b
    oscillates faster than the grid resolves x itself.
    """
    i = _interior(p, x)
    t = x.times
    P = kernel_exponent(p.b, t)
    v = x.values
    e_plus, e_minus = np.exp(P[i + 1] - P[i]), np.exp(P[i - 1] - P[i])
    width = x.dt / 3 * (e_minus + 4.0 + e_plus)
    deriv = (e_plus * v[i + 1] - e_minus * v[i - 1]) / width
    return float(np.max(np.abs(deriv - production(p, x, t[i]))))


def ode_residual_plain(p: ModelParams, x: GridFunction) -> float:
    """Same residual with the naive centered difference of x itself."""
    idx = _interior(p, x)
    t = x.times
    v = x.values
    deriv = (v[idx + 1] - v[idx - 1]) / (2 * x.dt)
    rhs = production(p, x, t[idx]) - p.b.eval(t[idx]) * v[idx]
    return float(np.max(np.abs(deriv - rhs)))


def voc_check(p: ModelParams, x: GridFunction, t1: float, t: float) -> float:
    """|x(t) - x(t1) e^{-int b} - int_{t1}^t e^{-int_s^t b} production(s) ds| on grid nodes."""
    i1, i = x.index_of(t1), x.index_of(t)
    if i < i1:
        raise ValueError("need t1 <= t")
    if i == i1:
        return 0.0
    s = x.times[i1:i + 1]
    lo = _interior(p, x)
    if i1 < lo[0] - 1:
        raise InsufficientHistory("t1 lies inside the delay padding of x")
    P = kernel_exponent(p.b, s)
    integrand = np.exp(P - P[-1]) * production(p, x, s)
    if s.size == 2:
        integral = 0.5 * x.dt * (integrand[0] + integrand[1])
    else:
        integral = simpson(integrand, x=s)
    rhs = x.values[i1] * math.exp(-(P[-1] - P[0])) + integral
    return abs(float(x.values[i]) - rhs)


def dde_integrate(p: ModelParams, history: GridFunction, t_span: tuple[float, float],
                  step: float, interp: str = "linear") -> GridFunction:
    """RK4 method of steps on ``t_span`` with delayed values from the computed past.

    ``history`` must cover ``[t_span[0] - upsilon, t_span[0]]``.  Delayed
    arguments are read by linear interpolation, or with ``interp="hermite"``
    by cubic Hermite interpolation through the stored slopes, which keeps the
    scheme fourth order when delays are not multiples of half the step.  An
    argument beyond the last completed step (delay shorter than the step)
    reads the latest state.
    """
    if interp not in ("linear", "hermite"):
        raise ValueError(f"unknown interpolation {interp!r}")
    hermite = interp == "hermite"
    t_a, t_b = t_span
    ups = p.upsilon
    n_hist = int(math.ceil(ups / step)) + 1
    t_h0 = t_a - n_hist * step
    if not history.covers(t_a - ups, t_a):
        raise InsufficientHistory(
            f"history must cover [{t_a - ups:.6g}, {t_a:.6g}], has [{history.t0:.6g}, {history.t_end:.6g}]")
    n_steps = int(round((t_b - t_a) / step))
    buf = np.empty(n_hist + n_steps + 1)
    hist_t = t_h0 + step * np.arange(n_hist + 1)
    hist_t[0] = max(hist_t[0], history.t0)
    buf[:n_hist + 1] = history(np.clip(hist_t, history.t0, history.t_end))
    # slopes: history by differences, computed nodes by the first RK stage.
    # d_lo[i] serves intervals starting at node i, d_hi[i] intervals ending
    # there; they differ only at t_a, where the slope may jump.
    d_lo = np.empty_like(buf)
    d_lo[:n_hist + 1] = np.gradient(buf[:n_hist + 1], step)
    d_hi = d_lo.copy()

    # coefficient samples at t_j and t_j + h/2
    tt = t_a + 0.5 * step * np.arange(2 * n_steps + 1)
    b_s = np.asarray(p.b.eval(tt), dtype=float) * np.ones_like(tt)
    lam_r = [term.lam * np.asarray(term.r.eval(tt), dtype=float) * np.ones_like(tt) for term in p.terms]
    lag_k = [(tt - term.tau.eval(tt) - t_h0) / step for term in p.terms]
    m, n = p.m, p.n
    lost = False

    def delayed(k: float, last: int, x_last: float, slope_known: int) -> float:
        if k >= last:
            return x_last
        i = int(k)
        f = k - i
        if not hermite or i + 1 > slope_known:
            return buf[i] * (1 - f) + buf[i + 1] * f
        f2, f3 = f * f, f * f * f
        return ((2 * f3 - 3 * f2 + 1) * buf[i] + (f3 - 2 * f2 + f) * step * d_lo[i]
                + (3 * f2 - 2 * f3) * buf[i + 1] + (f3 - f2) * step * d_hi[i + 1])

    def rhs(j2: int, x: float, last: int, x_last: float, slope_known: int) -> float:
        prod = 0.0
        for w, lk in zip(lam_r, lag_k):
            u = delayed(lk[j2], last, x_last, slope_known)
            if u > 0:
                prod += w[j2] * u ** m / (1.0 + u ** n)
        return prod - b_s[j2] * x

    x = buf[n_hist]
    for j in range(n_steps):
        last = n_hist + j
        # the slope at the current node is k1 itself, unknown while computing it
        k1 = rhs(2 * j, x, last, x, last - 1 if j else n_hist)
        d_lo[last] = k1
        if j:
            d_hi[last] = k1
        k2 = rhs(2 * j + 1, x + 0.5 * step * k1, last, x, last)
        k3 = rhs(2 * j + 1, x + 0.5 * step * k2, last, x, last)
        k4 = rhs(2 * j + 2, x + step * k3, last, x, last)
        x = x + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if x <= 0 and not lost:
            lost = True
            warnings.warn(f"state became non-positive at t={t_a + (j + 1) * step:.6g}", PositivityLoss)
        buf[last + 1] = x
    return GridFunction(t_a, step, buf[n_hist:])


def drift(p: ModelParams, x: GridFunction, horizon: float, step: float | None = None) -> tuple[float, GridFunction]:
    """Integrate from ``x.t_end - horizon`` seeded with ``x``; sup |trajectory - x|."""
    step = step or x.dt
    t_a = x.t_end - horizon
    if t_a - p.upsilon < x.t0:
        raise InsufficientHistory("solution window too short for the drift horizon")
    traj = dde_integrate(p, x, (t_a, x.t_end), step)
    ref = x(np.clip(traj.times, x.t0, x.t_end))
    return float(np.max(np.abs(traj.values - ref))), traj


def verify_solution(p: ModelParams, x: GridFunction, horizon: float = 20.0, dde_step: float | None = None,
                    n_pairs: int = 50, seed: int = 0) -> tuple[ResidualReport, GridFunction]:
    """Residual, variation-of-constants and drift diagnostics for a candidate."""
    res = ode_residual(p, x)
    idx = _interior(p, x)
    rng = np.random.default_rng(seed)
    lo, hi = int(idx[0]), len(x) - 1
    worst = 0.0
    for _ in range(n_pairs):
        a, c = sorted(rng.integers(lo, hi + 1, size=2))
        worst = max(worst, voc_check(p, x, x.t0 + a * x.dt, x.t0 + c * x.dt))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PositivityLoss)
        d, traj = drift(p, x, horizon, dde_step)
    report = ResidualReport(res, worst, horizon, d, len(idx), traj.inf, traj.sup,
                            any(issubclass(w.category, PositivityLoss) for w in caught))
    return report, traj
