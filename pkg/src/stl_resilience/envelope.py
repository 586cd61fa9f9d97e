"""Nominal trajectories and the envelope signals x0(t) + G(t)|B| omega."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .linalg import GainCurve, expm
from .signals import Signal


def nominal_trajectory(A, x0, grid, equilibrium=None) -> Signal:
    """Samples of x_e + exp(A t)(x0 - x_e) on a uniform grid.

    Uses a single exp(A dt) and repeated multiplication.
    """
    A = np.asarray(A, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != x0.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, x0 {x0.shape}")
    xe = np.zeros_like(x0) if equilibrium is None else np.asarray(equilibrium, dtype=float)
    dt = float(grid[1] - grid[0]) if len(grid) > 1 else 1.0
    step = expm(A * dt)
    out = np.empty((len(grid), len(x0)))
    z = x0 - xe
    for k in range(len(grid)):
        out[k] = z
        z = step @ z
    return Signal(t0=float(grid[0]), dt=dt, values=out + xe)


@dataclass(frozen=True)
class EnvelopeFamily:
    """Signals xi_omega = nominal + gain |input_map| omega for constant omega in R^m."""

    nominal: Signal
    gain: GainCurve
    input_map: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.nominal.dim
        B = np.eye(n) if self.input_map is None else np.atleast_2d(
            np.asarray(self.input_map, dtype=float))
        if B.shape[0] != n:
            raise ValueError(f"input map has {B.shape[0]} rows, state dimension is {n}")
        object.__setattr__(self, "input_map", B)
        if len(self.gain) != len(self.nominal):
            raise ValueError("nominal signal and gain curve must share the grid")
        if not np.allclose(self.gain.grid, self.nominal.times, atol=1e-9):
            raise ValueError("nominal signal and gain curve must share the grid")

    @property
    def omega_dim(self) -> int:
        return self.input_map.shape[1]

    @cached_property
    def channel_gain(self) -> np.ndarray:
        """G(t_k) |B| with shape (K, n, m)."""
        return self.gain.gains @ np.abs(self.input_map)

    @cached_property
    def half_width(self) -> np.ndarray:
        """G(t_k)|B| 1, the per-unit-eps half width of the envelope box. (K, n)."""
        return self.channel_gain.sum(axis=2)

    def _omega(self, omega):
        omega = np.asarray(omega, dtype=float)
        if omega.shape[-1] != self.omega_dim:
            raise ValueError(f"omega has dimension {omega.shape[-1]}, expected {self.omega_dim}")
        return omega

    def evaluate(self, omega) -> Signal:
        omega = self._omega(omega)
        if not np.any(omega):
            return self.nominal
        values = self.evaluate_batch(omega[None])[0]
        return Signal(self.nominal.t0, self.nominal.dt, values)

    def evaluate_batch(self, omegas) -> np.ndarray:
        """Envelope values for a stack of omegas (S, m); returns (S, K, n)."""
        omegas = np.atleast_2d(self._omega(omegas))
        return self.nominal.values[None] + np.einsum("knm,sm->skn", self.channel_gain, omegas)

    def bounds(self, eps: float) -> tuple:
        """Lower and upper envelope (omega = -eps*1 and +eps*1), each (K, n)."""
        w = self.half_width * eps
        return self.nominal.values - w, self.nominal.values + w


def lipschitz_omega(L_psi: float, gain: GainCurve, input_map=None) -> float:
    """L_psi * max_k ||G(t_k)||_2, times || |B| ||_2 when an input map is given."""
    if len(gain) == 0:
        raise ValueError("empty gain curve")
    if L_psi == 0:
        return 0.0
    peak = float(np.max(np.linalg.norm(gain.gains, ord=2, axis=(1, 2))))
    if input_map is not None:
        peak *= float(np.linalg.norm(np.abs(np.atleast_2d(input_map)), ord=2))
    return float(L_psi) * peak
