"""
Expression trees for almost-periodic coefficient functions.

Coefficients r_k(t), tau_k(t) and b(t) are built from constants, sinusoids,
absolute values, exponentials, sums, products and scalar multiples.  Every
tree evaluates vectorised over numpy arrays and serialises to a small JSON
form::

    {"const": 1.0}
    {"cos": {"amp": 1.2, "freq": 400, "phase": 0}}      # amp*cos(freq*t + phase)
    {"sin": {"amp": 1.0, "freq": 1.4142, "phase": 0}}
    {"abs": <expr>}
    {"exp": <expr>}
    {"sum": [<expr>, ...]}
    {"prod": [<expr>, ...]}
    {"scale": {"k": 0.5, "of": <expr>}}
    {"ramp": c}                                         # c*t, antiderivatives only

A bare JSON number is accepted as a constant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.integrate import simpson

from .errors import HypothesisViolation, UnsupportedCoefficient

__all__ = [
    "APExpr", "Const", "Sinusoid", "Abs", "Exp", "Sum", "Prod", "Scale", "Ramp",
    "BoundsEstimate", "OscillationBound",
    "evaluate", "estimate_bounds", "mean_value", "antiderivative",
    "derive_oscillation_bound", "from_json", "to_json",
]


class APExpr:
    """Base node.  Subclasses are immutable dataclasses."""

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        raise NotImplementedError

    def interval(self) -> tuple[float, float]:
        """Sound enclosure of the range over all real t."""
        raise NotImplementedError

    def children(self) -> tuple[APExpr, ...]:
        return ()

    def walk(self):
        yield self
        for c in self.children():
            yield from c.walk()

    def frequencies(self) -> list[float]:
        return [abs(n.freq) for n in self.walk() if isinstance(n, Sinusoid)]

    # operator sugar keeps the built-in example definitions readable
    def __add__(self, other):
        return Sum((self, _wrap(other)))

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Scale(float(other), self)
        return Prod((self, _wrap(other)))

    __rmul__ = __mul__


def _wrap(v) -> APExpr:
    return v if isinstance(v, APExpr) else Const(float(v))


@dataclass(frozen=True)
class Const(APExpr):
    c: float

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape, self.c) if t.ndim else float(self.c)

    def interval(self):
        return (self.c, self.c)


@dataclass(frozen=True)
class Sinusoid(APExpr):
    """``amp * cos(freq*t + phase)`` or ``amp * sin(freq*t + phase)``."""

    amp: float
    freq: float
    phase: float = 0.0
    kind: str = "cos"

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise ValueError(f"unknown sinusoid kind {self.kind!r}")
        if not math.isfinite(self.freq) or self.freq == 0.0:
            raise ValueError("sinusoid frequency must be finite and nonzero")

    def eval(self, t):
        fn = np.cos if self.kind == "cos" else np.sin
        return self.amp * fn(self.freq * np.asarray(t, dtype=float) + self.phase)

    def interval(self):
        a = abs(self.amp)
        return (-a, a)


@dataclass(frozen=True)
class Abs(APExpr):
    child: APExpr

    def eval(self, t):
        return np.abs(self.child.eval(t))

    def interval(self):
        lo, hi = self.child.interval()
        if lo >= 0:
            return (lo, hi)
        if hi <= 0:
            return (-hi, -lo)
        return (0.0, max(-lo, hi))

    def children(self):
        return (self.child,)


@dataclass(frozen=True)
class Exp(APExpr):
    child: APExpr

    def eval(self, t):
        return np.exp(self.child.eval(t))

    def interval(self):
        lo, hi = self.child.interval()
        return (math.exp(lo), math.exp(hi))

    def children(self):
        return (self.child,)


@dataclass(frozen=True)
class Sum(APExpr):
    terms: tuple[APExpr, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("empty sum")

    def eval(self, t):
        out = self.terms[0].eval(t)
        for term in self.terms[1:]:
            out = out + term.eval(t)
        return out

    def interval(self):
        lo = hi = 0.0
        for term in self.terms:
            a, b = term.interval()
            lo += a
            hi += b
        return (lo, hi)

    def children(self):
        return self.terms


@dataclass(frozen=True)
class Prod(APExpr):
    factors: tuple[APExpr, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("empty product")

    def eval(self, t):
        out = self.factors[0].eval(t)
        for f in self.factors[1:]:
            out = out * f.eval(t)
        return out

    def interval(self):
        lo, hi = self.factors[0].interval()
        for f in self.factors[1:]:
            a, b = f.interval()
            if math.isinf(lo) or math.isinf(hi) or math.isinf(a) or math.isinf(b):
                return (-math.inf, math.inf)
            cands = [x * y for x in (lo, hi) for y in (a, b)]
            lo, hi = min(cands), max(cands)
        return (lo, hi)

    def children(self):
        return self.factors


@dataclass(frozen=True)
class Scale(APExpr):
    k: float
    child: APExpr

    def eval(self, t):
        return self.k * self.child.eval(t)

    def interval(self):
        lo, hi = self.child.interval()
        a, b = self.k * lo, self.k * hi
        return (min(a, b), max(a, b))

    def children(self):
        return (self.child,)


@dataclass(frozen=True)
class Ramp(APExpr):
    """``slope * t``.  Not almost periodic; appears only in antiderivatives."""

    slope: float

    def eval(self, t):
        return self.slope * np.asarray(t, dtype=float)

    def interval(self):
        if self.slope == 0:
            return (0.0, 0.0)
        return (-math.inf, math.inf)


def evaluate(f: APExpr, t):
    """Pointwise value of ``f`` at ``t`` (scalar or array)."""
    out = f.eval(t)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# JSON form
# ---------------------------------------------------------------------------

def from_json(obj: Any) -> APExpr:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return Const(float(obj))
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"expression node must be a number or a one-key object, got {obj!r}")
    (key, val), = obj.items()
    if key == "const":
        return Const(float(val))
    if key in ("cos", "sin"):
        return Sinusoid(float(val.get("amp", 1.0)), float(val["freq"]), float(val.get("phase", 0.0)), key)
    if key == "abs":
        return Abs(from_json(val))
    if key == "exp":
        return Exp(from_json(val))
    if key == "sum":
        return Sum(tuple(from_json(v) for v in val))
    if key == "prod":
        return Prod(tuple(from_json(v) for v in val))
    if key == "scale":
        return Scale(float(val["k"]), from_json(val["of"]))
    if key == "ramp":
        return Ramp(float(val))
    raise ValueError(f"unknown expression node {key!r}")


def to_json(f: APExpr) -> Any:
    if isinstance(f, Const):
        return {"const": f.c}
    if isinstance(f, Sinusoid):
        return {f.kind: {"amp": f.amp, "freq": f.freq, "phase": f.phase}}
    if isinstance(f, Abs):
        return {"abs": to_json(f.child)}
    if isinstance(f, Exp):
        return {"exp": to_json(f.child)}
    if isinstance(f, Sum):
        return {"sum": [to_json(t) for t in f.terms]}
    if isinstance(f, Prod):
        return {"prod": [to_json(t) for t in f.factors]}
    if isinstance(f, Scale):
        return {"scale": {"k": f.k, "of": to_json(f.child)}}
    if isinstance(f, Ramp):
        return {"ramp": f.slope}
    raise TypeError(type(f))


# ---------------------------------------------------------------------------
# Bounds and means
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundsEstimate:
    inf_est: float
    sup_est: float
    window: tuple[float, float]
    step: float
    certified: bool
    short_window: bool = False


def _default_sampling(f: APExpr) -> tuple[tuple[float, float], float]:
    freqs = f.frequencies()
    if not freqs:
        return (0.0, 1.0), 0.5
    w_max, w_min = max(freqs), min(freqs)
    step = (2 * math.pi / w_max) / 40
    return (0.0, 20 * 2 * math.pi / w_min), step


def estimate_bounds(f: APExpr, window: tuple[float, float] | None = None,
                    step: float | None = None) -> BoundsEstimate:
    """Estimate inf f and sup f.

    Dense sampling is combined with the interval enclosure of the tree.  When
    the tree contains at most one sinusoid leaf every other node is a monotone
    or piecewise-monotone map of that single leaf, so the enclosure is attained
    and the result is flagged ``certified``.
    """
    d_window, d_step = _default_sampling(f)
    window = window or d_window
    step = step or d_step
    t_lo, t_hi = window
    if step <= 0 or t_hi <= t_lo:
        raise ValueError("need step > 0 and a nondegenerate window")

    lo, hi = f.interval()
    n_sin = sum(isinstance(n, Sinusoid) for n in f.walk())
    has_ramp = any(isinstance(n, Ramp) and n.slope != 0 for n in f.walk())
    freqs = f.frequencies()
    short = bool(freqs) and (t_hi - t_lo) < 2 * math.pi / min(freqs)

    if n_sin <= 1 and not has_ramp:
        return BoundsEstimate(lo, hi, (t_lo, t_hi), step, True, short)

    n = int(math.ceil((t_hi - t_lo) / step)) + 1
    vals = np.asarray(f.eval(np.linspace(t_lo, t_hi, n)))
    s_lo, s_hi = float(vals.min()), float(vals.max())
    # samples are inner estimates; keep them inside the (outer) enclosure
    s_lo, s_hi = max(s_lo, lo), min(s_hi, hi)
    if short:
        warnings.warn("bounds window is shorter than the slowest period", RuntimeWarning, stacklevel=2)
    return BoundsEstimate(s_lo, s_hi, (t_lo, t_hi), step, False, short)


def _linear_atoms(f: APExpr, coef: float = 1.0) -> list[tuple[float, APExpr]] | None:
    """Flatten ``f`` into sum(coef_i * atom_i) with atoms Const/Sinusoid/Ramp."""
    if isinstance(f, (Const, Sinusoid, Ramp)):
        return [(coef, f)]
    if isinstance(f, Scale):
        return _linear_atoms(f.child, coef * f.k)
    if isinstance(f, Sum):
        out = []
        for term in f.terms:
            part = _linear_atoms(term, coef)
            if part is None:
                return None
            out.extend(part)
        return out
    if isinstance(f, Prod):
        k = coef
        rest = []
        for fac in f.factors:
            if isinstance(fac, Const):
                k *= fac.c
            else:
                rest.append(fac)
        if not rest:
            return [(k, Const(1.0))]
        if len(rest) == 1:
            return _linear_atoms(rest[0], k)
    return None


def _split_constant(f: APExpr) -> tuple[float, list[tuple[float, Sinusoid]]] | None:
    atoms = _linear_atoms(f)
    if atoms is None or any(isinstance(a, Ramp) for _, a in atoms):
        return None
    c = sum(k * a.c for k, a in atoms if isinstance(a, Const))
    return c, [(k, a) for k, a in atoms if isinstance(a, Sinusoid)]


def mean_value(f: APExpr, T: float = 2000.0, starts: int = 5) -> float:
    """Mean value (1/T) * int_t^{t+T} f, averaged over several start points.

    For constants plus sinusoids the limit is the constant part, returned
    exactly.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    split = _split_constant(f)
    if split is not None:
        return float(split[0])
    freqs = f.frequencies()
    w_max = max(freqs) if freqs else 1.0
    h = min((2 * math.pi / w_max) / 40, T / 1000)
    n = int(math.ceil(T / h))
    n += n % 2  # even number of intervals for Simpson
    means = []
    for t0 in np.linspace(0.0, T, starts, endpoint=False):
        ts = np.linspace(t0, t0 + T, n + 1)
        means.append(simpson(f.eval(ts), x=ts) / T)
    return float(np.mean(means))


def antiderivative(f: APExpr) -> APExpr | None:
    """Exact antiderivative for linear combinations of constants and sinusoids."""
    atoms = _linear_atoms(f)
    if atoms is None:
        return None
    parts: list[APExpr] = []
    slope = 0.0
    for k, a in atoms:
        if isinstance(a, Const):
            slope += k * a.c
        elif isinstance(a, Sinusoid):
            amp = k * a.amp / a.freq
            if a.kind == "cos":
                parts.append(Sinusoid(amp, a.freq, a.phase, "sin"))
            else:
                parts.append(Sinusoid(-amp, a.freq, a.phase, "cos"))
        else:
            return None  # ramp: would need a quadratic node
    if slope:
        parts.insert(0, Ramp(slope))
    if not parts:
        return Const(0.0)
    return parts[0] if len(parts) == 1 else Sum(tuple(parts))


# ---------------------------------------------------------------------------
# Kernel domination pair (b*, F^s)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OscillationBound:
    """exp(-int_s^t b) <= F_s * exp(-int_s^t b_star) for all s <= t."""

    b_star: APExpr
    F_s: float
    b_star_inf: float
    certified: bool = True


def derive_oscillation_bound(b: APExpr, bounds: BoundsEstimate | None = None) -> OscillationBound:
    mean = mean_value(b)
    if mean <= 0:
        raise HypothesisViolation(f"mean value of b must be positive, got {mean:.6g}")
    bounds = bounds or estimate_bounds(b)
    if bounds.inf_est > 0:
        return OscillationBound(b, 1.0, bounds.inf_est, bounds.certified)
    split = _split_constant(b)
    if split is None:
        raise UnsupportedCoefficient(
            "b takes non-positive values and is not a constant plus sinusoids; "
            "no (b*, F^s) pair can be derived")
    c, sins = split
    if c <= 0:
        raise UnsupportedCoefficient("constant part of b must be positive")
    # |int_s^t p| <= 2 sup|P|, with sup|P| <= sum of antiderivative amplitudes
    D = sum(abs(k * s.amp / s.freq) for k, s in sins)
    return OscillationBound(Const(c), math.exp(2 * D), c, True)

