"""
The integral operator whose fixed points are the almost-periodic solutions.

    Phi(x)(t) = int_{-inf}^t exp(-int_s^t b) sum_k lam_k r_k(s) g(x(s - tau_k(s))) ds

with ``g = flux`` or, for the truncated variant, ``g = h_trunc``.  The improper
integral is cut at a length L chosen from the kernel-domination bound, so the
discarded tail is at most ``tail_tol``.

Quadrature runs on the grid of the input function.  All quadrature weights
are nonnegative and delayed values use linear interpolation, so the discrete
operator keeps the order properties of the exact one (monotone, cone
preserving).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import apexpr
from .errors import DomainError, GridError, InsufficientHistory
from .grid import GridFunction
from .model import ModelParams

# exponent range handled per block in the kernel recurrence
_BLOCK_EXPONENT = 200.0
# default grid points per period of the fastest coefficient frequency
POINTS_PER_PERIOD = 160


def flux(u, m: float, n: float):
    """u^m / (1 + u^n) for u >= 0."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("flux is defined for u >= 0 only")
    out = u ** m / (1.0 + u ** n)
    return float(out) if out.ndim == 0 else out


def h_trunc(u, m: float, n: float, V: float):
    """Flux frozen at its value at V beyond V."""
    if V <= 0:
        raise DomainError("V must be positive")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("h is defined for u >= 0 only")
    out = flux(np.minimum(u, V), m, n)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class QuadratureSpec:
    tail_tol: float
    L: float
    quad_dt: float
    rule: str = "simpson"

    def __post_init__(self):
        if not (self.tail_tol > 0 and self.L > 0 and self.quad_dt > 0):
            raise ValueError("tail_tol, L and quad_dt must be positive")
        if self.rule not in ("simpson", "trapezoid"):
            raise ValueError(f"unknown rule {self.rule!r}")


def tail_length(p: ModelParams, tail_tol: float, flux_bound: float | None = None) -> float:
    """Smallest L with F^s exp(-b*_inf L) sum(lam r+) * flux_bound / b*_inf <= tail_tol.

    Without ``flux_bound`` the bound sup_u u^m/(1+u^n) <= 1 is used, valid for
    n >= m.  For n < m the flux is unbounded and the caller must pass its sup
    over the relevant order interval.
    """
    if flux_bound is None:
        if p.n < p.m:
            raise ValueError("n < m: pass flux_bound (e.g. flux(B)), the flux is unbounded")
        flux_bound = 1.0
    c = p.osc.b_star_inf
    mass = p.osc.F_s * p.production_sup * flux_bound / c
    return max(math.log(mass / tail_tol) / c, 0.0) if mass > tail_tol else 0.0


def default_quad_dt(p: ModelParams, per_period: int = POINTS_PER_PERIOD) -> float:
    w = p.max_frequency
    return (2 * math.pi / w) / per_period if w > 0 else 1e-3


def make_quadrature(p: ModelParams, tail_tol: float = 1e-10, quad_dt: float | None = None,
                    flux_bound: float | None = None, rule: str = "simpson") -> QuadratureSpec:
    dt = quad_dt or default_quad_dt(p)
    return QuadratureSpec(tail_tol, max(tail_length(p, tail_tol, flux_bound), 10 * dt), dt, rule)


def kernel_exponent(b: apexpr.APExpr, s: np.ndarray) -> np.ndarray:
    """P(s) - P(s[0]) with P' = b, on a uniform grid ``s``."""
    anti = apexpr.antiderivative(b)
    if anti is not None:
        P = np.asarray(anti.eval(s), dtype=float)
        return P - P[0]
    # three-point cumulative rule on the same grid
    h = s[1] - s[0]
    f = np.asarray(b.eval(s), dtype=float)
    inc = np.empty(s.size - 1)
    inc[0] = h / 12 * (5 * f[0] + 8 * f[1] - f[2]) if s.size > 2 else h / 2 * (f[0] + f[1])
    inc[1:] = h / 12 * (-f[:-2] + 8 * f[1:-1] + 5 * f[2:])
    return np.concatenate([[0.0], np.cumsum(inc)])


def _accumulate(incr: np.ndarray, dP: np.ndarray, dP_bound: float) -> np.ndarray:
    """Solve Y[j] = exp(-dP[j]) Y[j-1] + incr[j], Y[-1] = 0, blockwise."""
    n = incr.size
    out = np.empty(n)
    blk = max(1, int(_BLOCK_EXPONENT / max(dP_bound, 1e-300)))
    carry = 0.0
    for a in range(0, n, blk):
        e = min(n, a + blk)
        Q = np.cumsum(dP[a:e])
        out[a:e] = np.exp(-Q) * (carry + np.cumsum(np.exp(Q) * incr[a:e]))
        carry = out[e - 1]
    return out


class PhiPlan:
    """Precomputed coefficients for applying Phi on a fixed grid and window.

    The input grid (``t0``, ``dt``, ``size``) must cover
    ``[w0 - L - upsilon, w1]``.  Output nodes are the input nodes in
    ``[w0, w1]``.  Every output integrates from the node nearest below
    ``w0 - L``, which contains the interval ``[t - L, t]``.
    """

    def __init__(self, p: ModelParams, t0: float, dt: float, size: int,
                 out_window: tuple[float, float], q: QuadratureSpec):
        if abs(dt - q.quad_dt) > 1e-12 * dt:
            raise GridError(f"input grid step {dt} differs from quad_dt {q.quad_dt}")
        self.p, self.q = p, q
        self.t0, self.dt, self.size = t0, dt, size
        w0, w1 = out_window
        t_end = t0 + (size - 1) * dt
        i_out0 = int(math.ceil((w0 - t0) / dt - 1e-9))
        i_out1 = int(math.floor((w1 - t0) / dt + 1e-9))
        i_start = int(math.floor((w0 - q.L - t0) / dt + 1e-9))
        if i_start < 0 or i_out1 >= size or i_out1 - i_out0 < 1:
            raise InsufficientHistory(
                f"input grid [{t0:.6g}, {t_end:.6g}] does not cover [w0 - L, w1] = [{w0 - q.L:.6g}, {w1:.6g}]")
        self.i_start, self.i_out0, self.i_out1 = i_start, i_out0, i_out1
        s = t0 + dt * np.arange(i_start, i_out1 + 1)
        self.s = s

        self.weights = []   # lam_k r_k(s)
        self.lag_idx = []   # interpolation index into the input values
        self.lag_frac = []
        for term in p.terms:
            self.weights.append(term.lam * np.asarray(term.r.eval(s), dtype=float) * np.ones_like(s))
            lag = s - np.asarray(term.tau.eval(s), dtype=float)
            k = (lag - t0) / dt
            if k.min() < -1e-9 or k.max() > size - 1 + 1e-9:
                raise InsufficientHistory(
                    f"delayed lookups reach {t0 + k.min() * dt:.6g}, before grid start {t0:.6g}")
            k = np.clip(k, 0.0, size - 1)
            i = np.minimum(np.floor(k).astype(np.intp), size - 2)
            self.lag_idx.append(i)
            self.lag_frac.append(k - i)

        P = kernel_exponent(p.b, s)
        self.dP = np.diff(P)
        self.dP_bound = float(np.abs(self.dP).max()) if self.dP.size else 1.0
        self.E1 = np.exp(-self.dP)                       # exp(-(P_j - P_{j-1}))
        self.E2 = self.E1[1:] * self.E1[:-1]             # exp(-(P_j - P_{j-2}))
        self.out_t0 = t0 + i_out0 * dt

    def integrand(self, values: np.ndarray, truncated: bool, V: float | None) -> np.ndarray:
        m, n = self.p.m, self.p.n
        g = np.zeros_like(self.s)
        for w, i, f in zip(self.weights, self.lag_idx, self.lag_frac):
            xl = values[i] * (1.0 - f) + values[i + 1] * f
            g += w * (h_trunc(xl, m, n, V) if truncated else flux(xl, m, n))
        return g

    def apply_values(self, values: np.ndarray, truncated: bool = False, V: float | None = None) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.size != self.size:
            raise GridError("input length does not match the plan")
        if np.any(values <= 0):
            raise DomainError("operator input must be positive")
        if truncated and V is None:
            V = self._default_V()
        g = self.integrand(values, truncated, V)
        h = self.dt
        incr = np.empty(g.size - 1)
        if self.q.rule == "trapezoid":
            incr[:] = h / 2 * (self.E1 * g[:-1] + g[1:])
        else:
            # interval [s_{j-1}, s_j] from the quadratic through j-2, j-1, j
            incr[0] = h / 12 * (5 * self.E1[0] * g[0] + 8 * g[1] - g[2] / self.E1[1])
            incr[1:] = h / 12 * (-self.E2 * g[:-2] + 8 * self.E1[1:] * g[1:-1] + 5 * g[2:])
        Y = _accumulate(incr, self.dP, self.dP_bound)
        # Y[j-1] is the integral from s_0 to s_j
        lo = self.i_out0 - self.i_start - 1
        hi = self.i_out1 - self.i_start
        return Y[lo:hi]

    def _default_V(self) -> float:
        from .model import compute_V
        return compute_V(self.p.m, self.p.n)

    def apply(self, x: GridFunction, truncated: bool = False, V: float | None = None) -> GridFunction:
        if abs(x.t0 - self.t0) > 1e-9 * self.dt or len(x) != self.size:
            raise GridError("input grid does not match the plan")
        return GridFunction(self.out_t0, self.dt, self.apply_values(x.values, truncated, V))


def phi_apply(p: ModelParams, x: GridFunction, out_window: tuple[float, float], q: QuadratureSpec,
              truncated: bool = False, V: float | None = None) -> GridFunction:
    """Apply Phi (or the truncated Theta when ``truncated``) to ``x`` on ``out_window``."""
    w0, w1 = out_window
    if not x.covers(w0 - q.L - p.upsilon, w1):
        raise InsufficientHistory(
            f"x must cover [{w0 - q.L - p.upsilon:.6g}, {w1:.6g}], has [{x.t0:.6g}, {x.t_end:.6g}]")
    if x.inf <= 0:
        raise DomainError("operator input must be positive")
    return PhiPlan(p, x.t0, x.dt, len(x), out_window, q).apply(x, truncated, V)


class SolverOperator:
    """Phi as a self-map of grid functions on a work domain ``[T0, w1]``.

    Lookups before ``T0`` read the constant continuation ``x(T0)``.  The
    extension commutes with scaling and preserves order, so the self-map
    inherits monotonicity and the scaling bound from Phi, and constants map
    exactly as under Phi.  On ``[T0 + L + upsilon, w1]`` it coincides with Phi.
    """

    def __init__(self, p: ModelParams, T0: float, w1: float, q: QuadratureSpec,
                 truncated: bool = False, V: float | None = None):
        self.p, self.q, self.truncated = p, q, truncated
        self.V = V if V is not None or not truncated else None
        dt = q.quad_dt
        self.size = int(math.floor((w1 - T0) / dt + 1e-9)) + 1
        self.T0, self.dt = T0, dt
        self.pad = int(math.ceil((q.L + p.upsilon) / dt)) + 2
        ext_t0 = T0 - self.pad * dt
        self.plan = PhiPlan(p, ext_t0, dt, self.size + self.pad, (T0, T0 + (self.size - 1) * dt), q)
        if self.plan.i_out1 - self.plan.i_out0 + 1 != self.size:
            raise GridError("internal: output grid does not match the work grid")
        self.calls = 0

    def grid_like(self, c: float) -> GridFunction:
        return GridFunction.constant(c, self.T0, self.dt, self.size)

    def __call__(self, x: GridFunction, y: GridFunction | None = None) -> GridFunction:
        # second slot unused: the hematopoiesis operator is nondecreasing in x only
        if len(x) != self.size or abs(x.t0 - self.T0) > 1e-9 * self.dt:
            raise GridError("argument is not on the work grid")
        self.calls += 1
        ext = np.concatenate([np.full(self.pad, x.values[0]), x.values])
        return GridFunction(self.T0, self.dt, self.plan.apply_values(ext, self.truncated, self.V))
