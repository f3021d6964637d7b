"""Uniformly sampled real functions with linear interpolation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridError, InsufficientHistory

# relative slack (in grid steps) when snapping times onto grid nodes
_SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples ``values[i] = x(t0 + i*dt)``; evaluation outside the grid raises."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("a grid function needs at least two samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, c: float, t0: float, dt: float, size: int) -> GridFunction:
        return cls(t0, dt, np.full(size, float(c)))

    @classmethod
    def on_window(cls, t_lo: float, t_hi: float, dt: float, fill=0.0) -> GridFunction:
        n = int(math.floor((t_hi - t_lo) / dt + _SNAP)) + 1
        return cls(t_lo, dt, np.full(n, float(fill)) if np.ndim(fill) == 0 else fill)

    def __len__(self):
        return self.values.size

    @property
    def t_end(self) -> float:
        return self.t0 + (self.values.size - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def sup(self) -> float:
        return float(self.values.max())

    @property
    def inf(self) -> float:
        return float(self.values.min())

    def covers(self, t_lo: float, t_hi: float) -> bool:
        eps = _SNAP * self.dt + 1e-12 * max(1.0, abs(t_lo), abs(t_hi))
        return t_lo >= self.t0 - eps and t_hi <= self.t_end + eps

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if t.size and not self.covers(float(t.min()), float(t.max())):
            raise InsufficientHistory(
                f"evaluation at [{t.min():.6g}, {t.max():.6g}] outside grid [{self.t0:.6g}, {self.t_end:.6g}]")
        out = np.interp(t, self.times, self.values)
        return float(out) if out.ndim == 0 else out

    def index_of(self, t: float) -> int:
        """Index of the grid node at ``t`` (must be a node up to rounding)."""
        k = (t - self.t0) / self.dt
        i = int(round(k))
        if abs(k - i) > 1e-6 or not 0 <= i < self.values.size:
            raise GridError(f"t={t!r} is not a node of this grid")
        return i

    def same_grid(self, other: GridFunction) -> bool:
        return (self.values.size == other.values.size
                and abs(self.t0 - other.t0) <= _SNAP * self.dt
                and abs(self.dt - other.dt) <= 1e-12 * self.dt)

    def require_same_grid(self, other: GridFunction) -> None:
        if not self.same_grid(other):
            raise GridError(
                f"grid mismatch: ({self.t0}, {self.dt}, {len(self)}) vs ({other.t0}, {other.dt}, {len(other)})")

    def le(self, other: GridFunction, tol: float = 0.0) -> bool:
        """Pointwise order ``self <= other + tol`` on a shared grid."""
        self.require_same_grid(other)
        return bool(np.all(self.values <= other.values + tol))

    def with_values(self, values) -> GridFunction:
        return GridFunction(self.t0, self.dt, values)

    def restrict(self, t_lo: float, t_hi: float) -> GridFunction:
        """Sub-grid on the nodes lying in ``[t_lo, t_hi]``."""
        i0 = max(0, int(math.ceil((t_lo - self.t0) / self.dt - _SNAP)))
        i1 = min(self.values.size - 1, int(math.floor((t_hi - self.t0) / self.dt + _SNAP)))
        if i1 - i0 < 1:
            raise GridError(f"window [{t_lo}, {t_hi}] holds fewer than two nodes")
        return GridFunction(self.t0 + i0 * self.dt, self.dt, self.values[i0:i1 + 1])

    def extend_left(self, n: int) -> GridFunction:
        """Prepend ``n`` nodes holding the first value (constant history)."""
        if n <= 0:
            return self
        return GridFunction(self.t0 - n * self.dt, self.dt,
                            np.concatenate([np.full(n, self.values[0]), self.values]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for t, v in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path: str | Path) -> GridFunction:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
            raise ValueError(f"{path}: expected header 't,value'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        if data.shape[0] < 2:
            raise ValueError(f"{path}: need at least two rows")
        t, v = data[:, 0], data[:, 1]
        dt = (t[-1] - t[0]) / (t.size - 1)
        if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-12):
            raise GridError(f"{path}: times are not uniformly spaced")
        return cls(float(t[0]), float(dt), v)
