"""
Sandwich iteration for mixed monotone operators on grid functions.

Starting from a lower solution u0 and an upper solution v0,

    u_{n+1} = op(u_n, v_n),   v_{n+1} = op(v_n, u_n)

squeezes monotonically onto the unique fixed point in [u0, v0].  Progress is
tracked by lambda_n = sup{lam : u_n >= lam v_n}, which increases to 1.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import model as _model
from .errors import DomainError, SandwichViolation
from .grid import GridFunction
from .model import ModelParams
from .operators import QuadratureSpec, SolverOperator, flux, make_quadrature

log = logging.getLogger(__name__)

MixedMonotoneOp = Callable[[GridFunction, GridFunction], GridFunction]


def phi_gamma(gamma: float, A: float, m: float, n: float) -> float:
    """Scaling factor: op(gamma x) >= phi_gamma(gamma) op(x) on [A, B]."""
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    An = A ** n
    return gamma ** m * (1 + An) / (1 + gamma ** n * An)


def theta_gamma(gamma: float, A: float, m: float, n: float) -> float:
    """Scaling factor for the truncated operator, min(phi_gamma, 1)."""
    return min(phi_gamma(gamma, A, m, n), 1.0)


def M_gamma(gamma: float, A: float, m: float, n: float) -> float:
    """gamma^(m-1) (1 + A^n) - (1 + gamma^n A^n); positive iff phi_gamma > gamma."""
    An = A ** n
    return gamma ** (m - 1) * (1 + An) - (1 + gamma ** n * An)


def gamma_max(A: float, m: float, n: float) -> float:
    """Maximiser of M_gamma; equals A / compute_B(A)."""
    if n - m + 1 <= 0:
        raise _model.RegimeUnsupported(_model.OPEN_PROBLEM_MESSAGE)
    An = A ** n
    return ((m - 1) * (1 + An) / (n * An)) ** (1.0 / (n - m + 1))


def lambda_of(u: GridFunction, v: GridFunction) -> float:
    """sup{lam : u >= lam v} for v > 0, clamped to 1."""
    u.require_same_grid(v)
    if np.any(v.values <= 0):
        raise DomainError("lambda_of needs v > 0")
    return float(min(np.min(u.values / v.values), 1.0))


@dataclass
class Step:
    n: int
    lambda_n: float
    gap: float
    sup_u: float
    inf_u: float
    normality_bound: float


@dataclass
class IterationTrace:
    steps: list[Step] = field(default_factory=list)
    converged: bool = False
    reason: str = "max_iter"
    warnings: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return self.steps[-1].n if self.steps else 0

    @property
    def final_gap(self) -> float:
        return self.steps[-1].gap

    @property
    def final_lambda(self) -> float:
        return self.steps[-1].lambda_n

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "lambda_n", "gap", "sup_u", "inf_u", "normality_bound"])
            for s in self.steps:
                w.writerow([s.n, repr(s.lambda_n), repr(s.gap), repr(s.sup_u), repr(s.inf_u),
                            repr(s.normality_bound)])


def _worst(values: np.ndarray, t0: float, dt: float) -> tuple[float, float]:
    i = int(np.argmax(values))
    return t0 + i * dt, float(values[i])


def check_sandwich(op: MixedMonotoneOp, u0: GridFunction, v0: GridFunction,
                   tol: float) -> tuple[GridFunction, GridFunction]:
    """Verify u0 <= v0, u0 <= op(u0, v0), op(v0, u0) <= v0; return the first iterates."""
    u0.require_same_grid(v0)
    d = u0.values - v0.values
    if d.max() > tol:
        t, e = _worst(d, u0.t0, u0.dt)
        raise SandwichViolation(f"u0 > v0 at t={t:.6g} by {e:.3g}", t, e)
    u1, v1 = op(u0, v0), op(v0, u0)
    d = u0.values - u1.values
    if d.max() > tol:
        t, e = _worst(d, u0.t0, u0.dt)
        raise SandwichViolation(f"u0 is not a lower solution: op(u0) < u0 at t={t:.6g} by {e:.3g}", t, e)
    d = v1.values - v0.values
    if d.max() > tol:
        t, e = _worst(d, u0.t0, u0.dt)
        raise SandwichViolation(f"v0 is not an upper solution: op(v0) > v0 at t={t:.6g} by {e:.3g}", t, e)
    return u1, v1


def iterate(op: MixedMonotoneOp, u0: GridFunction, v0: GridFunction, gap_tol: float = 1e-6,
            max_iter: int = 1000, check_tol: float = 1e-9,
            keep_iterates: bool = False) -> tuple[GridFunction, IterationTrace]:
    """Run the sandwich iteration; returns the bracket midpoint and the trace.

    Stops when sup(v_n - u_n) <= gap_tol or (1 - lambda_n) sup v0 <= gap_tol.
    With ``keep_iterates`` the trace gains ``iterates``, a list of (u_n, v_n).
    """
    u0.require_same_grid(v0)
    d = u0.values - v0.values
    if d.max() > check_tol:
        t, e = _worst(d, u0.t0, u0.dt)
        raise SandwichViolation(f"u0 > v0 at t={t:.6g} by {e:.3g}", t, e)
    trace = IterationTrace()
    sup_v0 = v0.sup
    u, v = u0, v0
    iterates = [(u, v)] if keep_iterates else None

    def record(k, u, v):
        lam = lambda_of(u, v)
        gap = float(np.max(v.values - u.values))
        bound = (1.0 - lam) * sup_v0
        trace.steps.append(Step(k, lam, gap, u.sup, u.inf, bound))
        return gap, bound

    gap, bound = record(0, u, v)
    if gap <= gap_tol or bound <= gap_tol:
        trace.converged, trace.reason = True, "gap_tol" if gap <= gap_tol else "lambda_tol"
        x = u.with_values(0.5 * (u.values + v.values))
        if keep_iterates:
            trace.iterates = iterates
        return x, trace

    u, v = check_sandwich(op, u0, v0, check_tol)
    for k in range(1, max_iter + 1):
        if k > 1:
            u, v = op(u, v), op(v, u)
        if keep_iterates:
            iterates.append((u, v))
        gap, bound = record(k, u, v)
        log.debug("step %d lambda=%.12g gap=%.3g", k, trace.steps[-1].lambda_n, gap)
        if gap <= gap_tol or bound <= gap_tol:
            trace.converged = True
            trace.reason = "gap_tol" if gap <= gap_tol else "lambda_tol"
            break
    if trace.converged and bound > 10 * max(gap, gap_tol):
        trace.warnings.append(
            f"normality bound (1-lambda) sup v0 = {bound:.3g} exceeds 10x the final gap {gap:.3g}")
    if keep_iterates:
        trace.iterates = iterates
    return u.with_values(0.5 * (u.values + v.values)), trace


# ---------------------------------------------------------------------------
# the hematopoiesis problem
# ---------------------------------------------------------------------------

@dataclass
class SolveSettings:
    gap_tol: float = 1e-6
    tail_tol: float = 1e-10
    quad_dt: float | None = None
    window: tuple[float, float] = (0.0, 40.0)
    max_iter: int = 1000
    rule: str = "simpson"


@dataclass
class SolveResult:
    x: GridFunction          # solution on the output window
    x_work: GridFunction     # solution on the whole work domain
    trace: IterationTrace
    report: _model.TheoremReport
    operator: SolverOperator
    quadrature: QuadratureSpec
    upper: float             # upper end of the invariant bracket (B)
    truncated: bool
    seconds: float

    def residual(self) -> float:
        """sup |op(x) - x| on the output window."""
        y = self.operator(self.x_work)
        w0, w1 = self.x.t0, self.x.t_end
        return float(np.max(np.abs(y.restrict(w0, w1).values - self.x.values)))

    def summary(self) -> dict:
        return {
            "theorem": self.report.theorem,
            "A": self.report.A,
            "B": self.report.B,
            "V": self.report.V,
            "min_x": self.x.inf,
            "max_x": self.x.sup,
            "iterations": self.trace.iterations,
            "final_lambda": self.trace.final_lambda,
            "final_gap": self.trace.final_gap,
            "converged": self.trace.converged,
            "reason": self.trace.reason,
            "window": [self.x.t0, self.x.t_end],
            "quad_dt": self.quadrature.quad_dt,
            "L": self.quadrature.L,
            "truncated": self.truncated,
        }


def build_operator(p: ModelParams, A: float, settings: SolveSettings | None = None):
    """Work-domain operator, quadrature and bracket (A, upper) for the regime of ``p``."""
    s = settings or SolveSettings()
    B = _model.compute_B(A, p.m, p.n)
    truncated = p.n > p.m
    V = _model.compute_V(p.m, p.n) if truncated else None
    fb = None if truncated else flux(B, p.m, p.n)
    q = make_quadrature(p, s.tail_tol, s.quad_dt, fb, s.rule)
    w0, w1 = s.window
    # whole number of steps before w0, so the output window starts on a node
    T0 = w0 - math.ceil((q.L + p.upsilon + 1.0) / q.quad_dt) * q.quad_dt
    op = SolverOperator(p, T0, w1, q, truncated=truncated, V=V)
    return op, q, B, truncated


def solve(p: ModelParams, A: float, settings: SolveSettings | None = None,
          force: bool = False) -> SolveResult:
    """Compute the almost-periodic solution bracketed by [A, B] on the output window."""
    s = settings or SolveSettings()
    report = _model.check(p, A)
    if not report.applicable and not force:
        bad = ", ".join(c.name for c in report.failing())
        raise _model.HypothesisViolation(f"hypotheses fail ({bad}); pass force=True to iterate anyway")
    t_start = time.perf_counter()
    op, q, B, truncated = build_operator(p, A, s)
    u0, v0 = op.grid_like(A), op.grid_like(B)
    x_work, trace = iterate(op, u0, v0, s.gap_tol, s.max_iter, check_tol=10 * q.tail_tol + 1e-9)
    x = x_work.restrict(*s.window)
    return SolveResult(x, x_work, trace, report, op, q, B, truncated, time.perf_counter() - t_start)
