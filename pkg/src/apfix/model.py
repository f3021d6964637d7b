"""
Model parameters and the admissibility checks for the two existence regimes.

The model is

    x'(t) = sum_k lam_k r_k(t) x(t - tau_k(t))^m / (1 + x(t - tau_k(t))^n) - b(t) x(t)

with m > 1.  ``check_theorem1`` covers m - 1 < n <= m with the bracket
[A, B]; ``check_theorem2`` covers n > m with the a-priori bound V.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

from . import apexpr
from .apexpr import APExpr, BoundsEstimate, OscillationBound
from .errors import HypothesisViolation, RegimeUnsupported

H0_MESSAGE = ("m <= 1 is the classical regime (H0: 0 <= m <= 1) already covered "
              "in the literature; this solver requires m > 1")
OPEN_PROBLEM_MESSAGE = ("0 < n <= m - 1 is an open problem: no constant pair u0 < v0 "
                        "can satisfy Phi(u0) >= u0 and Phi(v0) <= v0 simultaneously")


@dataclass(frozen=True)
class Term:
    """One delayed production term lam * r(t) * flux(x(t - tau(t)))."""

    r: APExpr
    tau: APExpr
    lam: float = 1.0


@dataclass(frozen=True)
class ModelParams:
    m: float
    n: float
    terms: tuple[Term, ...]
    b: APExpr

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("model needs at least one production term")

    @cached_property
    def r_bounds(self) -> tuple[BoundsEstimate, ...]:
        return tuple(apexpr.estimate_bounds(t.r) for t in self.terms)

    @cached_property
    def tau_bounds(self) -> tuple[BoundsEstimate, ...]:
        return tuple(apexpr.estimate_bounds(t.tau) for t in self.terms)

    @cached_property
    def b_bounds(self) -> BoundsEstimate:
        return apexpr.estimate_bounds(self.b)

    @cached_property
    def mean_b(self) -> float:
        return apexpr.mean_value(self.b)

    @cached_property
    def osc(self) -> OscillationBound:
        return apexpr.derive_oscillation_bound(self.b, self.b_bounds)

    @property
    def upsilon(self) -> float:
        """Largest delay, max_k sup tau_k."""
        return max(tb.sup_est for tb in self.tau_bounds)

    @property
    def lower_rate(self) -> float:
        """sum_k lam_k inf r_k / sup b."""
        return sum(t.lam * rb.inf_est for t, rb in zip(self.terms, self.r_bounds)) / self.b_bounds.sup_est

    @property
    def upper_rate(self) -> float:
        """F^s sum_k lam_k sup r_k / inf b*."""
        s = sum(t.lam * rb.sup_est for t, rb in zip(self.terms, self.r_bounds))
        return self.osc.F_s * s / self.osc.b_star_inf

    @property
    def production_sup(self) -> float:
        return sum(t.lam * rb.sup_est for t, rb in zip(self.terms, self.r_bounds))

    @property
    def max_frequency(self) -> float:
        freqs = self.b.frequencies()
        for t in self.terms:
            freqs += t.r.frequencies() + t.tau.frequencies()
        return max(freqs, default=0.0)

    def uncertified(self) -> list[str]:
        names = [f"r{k + 1}" for k, rb in enumerate(self.r_bounds) if not rb.certified]
        names += [f"tau{k + 1}" for k, tb in enumerate(self.tau_bounds) if not tb.certified]
        if not self.b_bounds.certified:
            names.append("b")
        if not self.osc.certified:
            names.append("b*")
        return names


def validate(p: ModelParams) -> None:
    """Reject parameter sets outside the supported regime or the standing hypotheses."""
    if not (p.m > 0 and p.n > 0):
        raise RegimeUnsupported("exponents m and n must be positive")
    if p.m <= 1:
        raise RegimeUnsupported(H0_MESSAGE)
    if p.n <= p.m - 1:
        raise RegimeUnsupported(OPEN_PROBLEM_MESSAGE)
    for k, t in enumerate(p.terms, 1):
        if t.lam <= 0:
            raise HypothesisViolation(f"lambda_{k} must be positive")
    for k, tb in enumerate(p.tau_bounds, 1):
        if tb.inf_est < 0:
            raise HypothesisViolation(f"tau_{k} takes negative values (inf ~ {tb.inf_est:.6g})")
    if p.upsilon <= 0:
        raise HypothesisViolation("the largest delay sup tau_k must be positive")
    for k, rb in enumerate(p.r_bounds, 1):
        if rb.inf_est < 0:
            raise HypothesisViolation(f"r_{k} takes negative values (inf ~ {rb.inf_est:.6g})")
    if not any(rb.inf_est > 0 for rb in p.r_bounds):
        raise HypothesisViolation("at least one r_k must have a positive infimum")
    if p.mean_b <= 0:
        raise HypothesisViolation(f"mean value of b must be positive, got {p.mean_b:.6g}")
    p.osc  # raises if no kernel-domination pair exists


# ---------------------------------------------------------------------------
# scalar constants
# ---------------------------------------------------------------------------

def _regime_gate(m: float, n: float) -> None:
    if n - m + 1 <= 0:
        raise RegimeUnsupported(OPEN_PROBLEM_MESSAGE)


def compute_B(A: float, m: float, n: float) -> float:
    """Upper end of the invariant bracket paired with the lower end A."""
    _regime_gate(m, n)
    if A <= 0:
        raise ValueError("A must be positive")
    An = A ** n
    return A * (n * An / ((m - 1) * (1 + An))) ** (1.0 / (n - m + 1))


def threshold_A(m: float, n: float) -> float:
    """B(A) > A exactly when A exceeds this value."""
    _regime_gate(m, n)
    return ((m - 1) / (n - m + 1)) ** (1.0 / n)


def compute_V(m: float, n: float) -> float:
    """A-priori sup bound on positive solutions when n > m (argmax of the flux)."""
    if n <= m:
        raise RegimeUnsupported("the bound V requires n > m")
    return (m / (n - m)) ** (1.0 / n)


def lower_ratio(A: float, m: float, n: float) -> float:
    """(1 + A^n) / A^(m-1), i.e. A / flux(A)."""
    return (1 + A ** n) / A ** (m - 1)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class ChainLink:
    name: str
    lhs: float
    relation: str
    rhs: float
    passed: bool


@dataclass
class TheoremReport:
    theorem: str
    A: float
    B: float
    V: float | None
    threshold: float
    chain: list[ChainLink] = field(default_factory=list)
    applicable: bool = False
    uncertified: list[str] = field(default_factory=list)

    def failing(self) -> list[ChainLink]:
        return [c for c in self.chain if not c.passed]

    def link(self, name: str) -> ChainLink:
        for c in self.chain:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def _cmp(lhs: float, rel: str, rhs: float, slack: float) -> bool:
    if any(map(math.isnan, (lhs, rhs))):
        return False
    if rel == "<=":
        return lhs <= rhs + slack
    if rel == "<":
        return lhs < rhs
    if rel == ">":
        return lhs > rhs
    if rel == ">=":
        return lhs >= rhs - slack
    raise ValueError(rel)


class _Chain(list):
    def __init__(self, slack):
        super().__init__()
        self.slack = slack

    def add(self, name, lhs, rel, rhs):
        self.append(ChainLink(name, float(lhs), rel, float(rhs), _cmp(lhs, rel, rhs, self.slack)))


def _safe(fn, *args):
    try:
        return fn(*args)
    except (RegimeUnsupported, ValueError, ZeroDivisionError, OverflowError):
        return math.nan


def check_theorem1(p: ModelParams, A: float, slack: float = 0.0) -> TheoremReport:
    """Bracket [A, B] regime: m - 1 < n <= m."""
    m, n = p.m, p.n
    thr = _safe(threshold_A, m, n)
    B = _safe(compute_B, A, m, n)
    ch = _Chain(slack)
    ch.add("n > m-1", n, ">", m - 1)
    ch.add("m-1 > 0", m - 1, ">", 0.0)
    ch.add("n <= m", n, "<=", m)
    ch.add("A > threshold", A, ">", thr)
    ch.add("lower ratio <= lower rate", _safe(lower_ratio, A, m, n), "<=", p.lower_rate)
    ch.add("lower rate <= upper rate", p.lower_rate, "<=", p.upper_rate)
    ch.add("upper rate <= upper ratio", p.upper_rate, "<=", _safe(lower_ratio, B, m, n))
    return TheoremReport("T1", A, B, None, thr, list(ch), all(c.passed for c in ch), p.uncertified())


def check_theorem2(p: ModelParams, A: float, slack: float = 0.0) -> TheoremReport:
    """Lower-bound regime n > m > 1 with a-priori bound V."""
    m, n = p.m, p.n
    thr = _safe(threshold_A, m, n)
    B = _safe(compute_B, A, m, n)
    V = _safe(compute_V, m, n)
    ch = _Chain(slack)
    ch.add("requires n > m", n, ">", m)
    ch.add("m > 1", m, ">", 1.0)
    ch.add("A > threshold", A, ">", thr)
    ch.add("A <= V", A, "<=", V)
    ch.add("V <= B", V, "<=", B)
    ch.add("lower ratio <= lower rate", _safe(lower_ratio, A, m, n), "<=", p.lower_rate)
    ch.add("lower rate <= upper rate", p.lower_rate, "<=", p.upper_rate)
    ch.add("upper rate <= V", p.upper_rate, "<=", V)
    return TheoremReport("T2", A, B, None if math.isnan(V) else V, thr, list(ch),
                         all(c.passed for c in ch), p.uncertified())


def check(p: ModelParams, A: float, slack: float = 0.0) -> TheoremReport:
    """Validate ``p`` and run the check matching its regime."""
    validate(p)
    return check_theorem1(p, A, slack) if p.n <= p.m else check_theorem2(p, A, slack)


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def params_from_dict(d: dict[str, Any]) -> ModelParams:
    terms = tuple(
        Term(apexpr.from_json(t["r"]), apexpr.from_json(t["tau"]), float(t.get("lambda", 1.0)))
        for t in d["terms"])
    return ModelParams(float(d["m"]), float(d["n"]), terms, apexpr.from_json(d["b"]))


def params_to_dict(p: ModelParams) -> dict[str, Any]:
    return {
        "m": p.m,
        "n": p.n,
        "terms": [{"lambda": t.lam, "r": apexpr.to_json(t.r), "tau": apexpr.to_json(t.tau)} for t in p.terms],
        "b": apexpr.to_json(p.b),
    }


def load_config(path: str | Path) -> tuple[ModelParams, float | None]:
    """Read a model JSON file; returns the parameters and the optional ``A``."""
    with open(path) as fh:
        d = json.load(fh)
    A = d.get("A")
    return params_from_dict(d), (None if A is None else float(A))
