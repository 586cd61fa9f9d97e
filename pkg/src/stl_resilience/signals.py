"""Uniformly sampled trajectories and their CSV form."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

GRID_TOL = 1e-9


def make_grid(t_end: float, dt: float) -> np.ndarray:
    """Uniform grid 0, dt, ..., t_end. ``t_end`` must be a multiple of ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    steps = t_end / dt
    k = round(steps)
    if abs(steps - k) > GRID_TOL * max(1.0, steps):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    return np.arange(k + 1) * dt


def steps_floor(x: float, dt: float) -> int:
    """floor(x / dt), treating values within GRID_TOL of an integer as that integer."""
    q = x / dt
    r = round(q)
    return int(r) if abs(q - r) <= GRID_TOL * max(1.0, abs(q)) else math.floor(q)


def steps_ceil(x: float, dt: float) -> int:
    q = x / dt
    r = round(q)
    return int(r) if abs(q - r) <= GRID_TOL * max(1.0, abs(q)) else math.ceil(q)


@dataclass(frozen=True)
class Signal:
    t0: float
    dt: float
    values: np.ndarray  # (K, n)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)  # own copy, frozen below
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError("signal values must be (K, n)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t_end(self) -> float:
        return self.t0 + (len(self) - 1) * self.dt

    def __len__(self):
        return self.values.shape[0]

    def index_of(self, t: float) -> int:
        """Nearest sample index; ``t`` must lie within dt/2 of a grid point."""
        k = round((t - self.t0) / self.dt)
        if abs(self.t0 + k * self.dt - t) > self.dt / 2 + GRID_TOL or k < 0:
            raise ValueError(f"t={t} is not on the signal grid")
        return int(k)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(self.dim)])
        for t, row in zip(self.times, self.values):
            w.writerow([format(t, ".17g")] + [format(v, ".17g") for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Signal":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty CSV")
        header = [h.strip() for h in rows[0]]
        expected = ["t"] + [f"x{i + 1}" for i in range(len(header) - 1)]
        if header != expected or len(header) < 2:
            raise ValueError(f"CSV header must be t,x1,...,xn; got {','.join(header)}")
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError("CSV has no samples")
        t = data[:, 0]
        if len(t) == 1:
            raise ValueError("CSV needs at least two samples to fix dt")
        dt = float(t[1] - t[0])
        if dt <= 0 or np.max(np.abs(np.diff(t) - dt)) > 1e-6 * dt:
            raise ValueError("CSV time column is not uniformly spaced")
        return cls(t0=float(t[0]), dt=dt, values=data[:, 1:])
