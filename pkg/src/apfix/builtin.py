"""Built-in model configurations.

Examples 1 and 2 share the coefficients

    r1 = (5 + |cos(sqrt2 t)|)/2,       tau1 = 2 exp(cos t)
    r2 = (13 + 0.6 |sin(sqrt3 t)|)/4,  tau2 = 2 exp(sin t)
    b  = 1 + 1.2 cos(400 t)

and differ in the exponents: (m, n) = (1.1, 0.5) with A = 4, and
(m, n) = (1.1, 1.2) with A = 1.3.  Example 0 is a constant-coefficient demo
whose solution is the scalar equilibrium.
"""

from __future__ import annotations

import math

from .apexpr import Abs, Const, Exp, Sinusoid
from .model import ModelParams, Term

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)


def _example_terms() -> tuple[Term, Term]:
    r1 = 0.5 * (Const(5.0) + Abs(Sinusoid(1.0, SQRT2, 0.0, "cos")))
    r2 = 0.25 * (Const(13.0) + 0.6 * Abs(Sinusoid(1.0, SQRT3, 0.0, "sin")))
    tau1 = 2.0 * Exp(Sinusoid(1.0, 1.0, 0.0, "cos"))
    tau2 = 2.0 * Exp(Sinusoid(1.0, 1.0, 0.0, "sin"))
    return Term(r1, tau1), Term(r2, tau2)


def example_b():
    return Const(1.0) + Sinusoid(1.2, 400.0, 0.0, "cos")


def example(ex_id: int) -> tuple[ModelParams, float]:
    """Return ``(params, A)`` for a built-in example id."""
    if ex_id == 1:
        return ModelParams(1.1, 0.5, _example_terms(), example_b()), 4.0
    if ex_id == 2:
        return ModelParams(1.1, 1.2, _example_terms(), example_b()), 1.3
    if ex_id == 0:
        return constant_model(3.0, 1.0, 1.1, 0.5, tau=1.0), 4.0
    raise KeyError(f"unknown example id {ex_id}; choose 0, 1 or 2")


def constant_model(r: float, b: float, m: float, n: float, tau: float = 1.0, lam: float = 1.0) -> ModelParams:
    return ModelParams(m, n, (Term(Const(r), Const(tau), lam),), Const(b))


EXAMPLE_IDS = (0, 1, 2)
