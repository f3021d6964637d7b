import math

import pytest
from scipy.optimize import bisect

from apfix import builtin
from apfix import fixedpoint as fp
from apfix.apexpr import Const, Sinusoid, Abs
from apfix.model import ModelParams, Term


def equilibrium(terms, b, m, n, lo, hi):
    """Bisection root of sum(lam r) c^m/(1+c^n) = b c on [lo, hi]."""
    s = sum(lam * r for lam, r in terms)
    return bisect(lambda c: s * c ** m / (1 + c ** n) - b * c, lo, hi, xtol=1e-14, rtol=1e-15)


def small_model(m, n, r0, a=0.0, beta=0.0, nu=3.0, omega=math.sqrt(2), tau=1.0):
    """One-term model r = r0(1 + a|cos(omega t)|), b = 1 + beta cos(nu t), constant delay."""
    r = Const(r0) if a == 0 else r0 * (Const(1.0) + a * Abs(Sinusoid(1.0, omega)))
    b = Const(1.0) if beta == 0 else Const(1.0) + Sinusoid(beta, nu)
    return ModelParams(m, n, (Term(r, Const(tau)),), b)


@pytest.fixture(scope="session")
def ex1():
    return builtin.example(1)


@pytest.fixture(scope="session")
def ex2():
    return builtin.example(2)


@pytest.fixture(scope="session")
def solved_ex1(ex1):
    p, A = ex1
    return fp.solve(p, A)


@pytest.fixture(scope="session")
def solved_ex2(ex2):
    p, A = ex2
    return fp.solve(p, A)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = {}


def record(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
