"""Certified lower bounds on resilience.

For a disturbance level eps the envelope family {xi_omega : omega in B_inf(eps)}
is sampled on a grid whose 2-norm cover radius is delta. With

    eta*  = max_r -rho(xi_{omega_r})
    L_w   = L_psi * max_t ||G(t)|B| ||

the level is certified when eta* + L_w * delta <= 0. Certification is monotone
in eps, so the largest certified level is found by bisection.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import stl
from .dynamics import LinearSystem, NonlinearSystem
from .envelope import EnvelopeFamily, lipschitz_omega, nominal_trajectory
from .errors import NotEquilibrium, RegionExcludesEquilibrium, SampleBudgetExceeded
from .linalg import absolute_gain, decompose, jordan_gain
from .parallel import parallel_map

METHODS = ("jordan", "absolute")
STATUSES = ("certified", "nominal_violation", "not_certified", "proviso_failed")


@dataclass(frozen=True)
class ScenarioConfig:
    eps_hi: float = 1.0
    delta: float | None = None  # None: 0.05 * eps_hi, coarsened to fit max_samples
    eps_tol: float = 1e-4
    max_samples: int = 200_000
    method: str = "jordan"

    def __post_init__(self):
        if self.eps_hi <= 0:
            raise ValueError("eps_hi must be positive")
        if self.eps_tol <= 0:
            raise ValueError("eps_tol must be positive")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.max_samples < 1:
            raise ValueError("max_samples must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    def resolve_delta(self, m: int) -> float:
        if self.delta is not None:
            return self.delta
        delta = 0.05 * self.eps_hi
        per_axis = math.floor(self.max_samples ** (1.0 / m) + 1e-9)
        if per_axis < 2:
            raise SampleBudgetExceeded(f"max_samples={self.max_samples} cannot cover {m} dims")
        # smallest delta whose cover at eps_hi fits the budget
        needed = (2 * self.eps_hi / (per_axis - 1)) * math.sqrt(m) / 2
        return max(delta, needed * (1 + 1e-9))


@dataclass(frozen=True)
class ResilienceCertificate:
    eps_star: float
    eta_star: float
    l_omega: float
    delta: float
    samples_used: int
    bisection_trace: list
    method: str
    status: str
    rho_nominal: float
    extras: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.status == "certified" and self.eps_star > 0

    def to_json(self) -> dict:
        out = {
            "eps_star": self.eps_star,
            "eta_star": self.eta_star,
            "l_omega": self.l_omega,
            "delta": self.delta,
            "samples_used": self.samples_used,
            "method": self.method,
            "trace": [{"eps": e, "certified": c} for e, c in self.bisection_trace],
            "status": self.status,
            "rho_nominal": self.rho_nominal,
        }
        out.update(self.extras)
        return out


@dataclass(frozen=True)
class NonlinearCorrection:
    equilibrium: np.ndarray
    region: np.ndarray  # (n, 2) per-dimension [lo, hi]
    hessian_bound: float
    delta_bar: float


def cover_samples(eps: float, delta: float, m: int, max_samples: int | None = None) -> np.ndarray:
    """Regular grid over [-eps, eps]^m whose 2-norm covering radius is <= delta.

    Per-axis spacing s = 2 delta / sqrt(m), so the half-diagonal of a grid cell
    is s sqrt(m) / 2 = delta. Returns (M, m).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if m < 1:
        raise ValueError("m must be at least 1")
    if eps == 0:
        return np.zeros((1, m))
    s = 2 * delta / math.sqrt(m)
    per_axis = math.ceil(2 * eps / s + 1)
    count = per_axis ** m
    if max_samples is not None and count > max_samples:
        raise SampleBudgetExceeded(
            f"cover of [-{eps:g},{eps:g}]^{m} at delta={delta:g} needs {count} samples "
            f"(cap {max_samples}); use a coarser delta")
    axis = np.linspace(-eps, eps, per_axis)
    return np.array(list(itertools.product(axis, repeat=m)), dtype=float).reshape(count, m)


def scenario_eta(phi, fam: EnvelopeFamily, samples, chunk: int = 1024) -> float:
    """max_r -rho(phi, xi_{omega_r}) at t = 0."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("need at least one sample")
    dt = fam.nominal.dt

    def worst(start):
        X = fam.evaluate_batch(samples[start:start + chunk])
        return float(np.max(-stl.robustness_batch(phi, X, dt)))

    return max(parallel_map(worst, range(0, samples.shape[0], chunk)))


def certify(eta_star: float, l_omega: float, delta: float) -> bool:
    if l_omega < 0 or delta <= 0:
        raise ValueError("need l_omega >= 0 and delta > 0")
    return eta_star + l_omega * delta <= 0


def build_family(system: LinearSystem, x0, grid, method: str = "jordan") -> EnvelopeFamily:
    dec = decompose(system.A)
    gain = jordan_gain(dec, grid) if method == "jordan" else absolute_gain(system.A, dec, grid)
    nominal = nominal_trajectory(system.A, x0, grid, system.equilibrium)
    return EnvelopeFamily(nominal, gain, system.input_map)


def resilience_lower_bound(phi, system: LinearSystem, x0, grid,
                           cfg: ScenarioConfig) -> ResilienceCertificate:
    fam = build_family(system, x0, grid, cfg.method)
    m = fam.omega_dim
    rho0 = stl.robustness(phi, fam.nominal, 0.0)
    l_omega = lipschitz_omega(stl.lipschitz(phi), fam.gain, fam.input_map)
    delta = cfg.resolve_delta(m)

    if rho0 <= 0:
        return ResilienceCertificate(0.0, -rho0, l_omega, delta, 1, [], cfg.method,
                                     "nominal_violation", rho0)

    def feasible(eps):
        samples = cover_samples(eps, delta, m, cfg.max_samples)
        eta = scenario_eta(phi, fam, samples)
        return certify(eta, l_omega, delta), eta, len(samples)

    trace = []
    best = (0.0, -rho0, 1)
    ok, eta, count = feasible(cfg.eps_hi)
    trace.append((cfg.eps_hi, ok))
    if ok:
        best = (cfg.eps_hi, eta, count)
    else:
        lo, hi = 0.0, cfg.eps_hi
        while hi - lo > cfg.eps_tol:
            mid = 0.5 * (lo + hi)
            ok, eta, count = feasible(mid)
            trace.append((mid, ok))
            if ok:
                lo = mid
                best = (mid, eta, count)
            else:
                hi = mid
    eps_star, eta_star, count = best
    status = "certified" if eps_star > 0 else "not_certified"
    extras = {"bracket_saturated": bool(eps_star == cfg.eps_hi)}
    return ResilienceCertificate(eps_star, eta_star, l_omega, delta, count, trace,
                                 cfg.method, status, rho0, extras)


def delta_bar(L_H: float, region, x_e) -> float:
    """1/2 L_H max_{x in region} ||x - x_e||^2 (the max sits at a vertex)."""
    region = np.asarray(region, dtype=float).reshape(-1, 2)
    x_e = np.asarray(x_e, dtype=float)
    if np.any(region[:, 0] > region[:, 1]):
        raise ValueError("region needs lo <= hi on every axis")
    if np.any(x_e < region[:, 0] - 1e-12) or np.any(x_e > region[:, 1] + 1e-12):
        raise RegionExcludesEquilibrium(f"x_e={x_e.tolist()} lies outside the region")
    far = np.maximum(np.abs(region[:, 0] - x_e), np.abs(region[:, 1] - x_e))
    return 0.5 * float(L_H) * float(np.sum(far ** 2))


def nonlinear_correction(system: NonlinearSystem) -> NonlinearCorrection:
    L_H = system.hessian_bound
    if L_H is None:
        L_H = system.f.hessian_bound(system.region)
    return NonlinearCorrection(system.equilibrium, system.region, float(L_H),
                               delta_bar(L_H, system.region, system.equilibrium))


def linearize(system: NonlinearSystem) -> LinearSystem:
    fe = system.f(system.equilibrium)
    if np.max(np.abs(fe)) > 1e-6:
        raise NotEquilibrium(f"|f(x_e)|_inf = {np.max(np.abs(fe)):.3g} > 1e-6")
    A = system.f.jacobian(system.equilibrium)
    return LinearSystem(A, system.input_map, system.equilibrium)


def nonlinear_lower_bound(phi, system: NonlinearSystem, x0, grid,
                          cfg: ScenarioConfig) -> ResilienceCertificate:
    """Linearise at x_e, certify the linear system, subtract delta_bar.

    The result is eps_lin - delta_bar when eps_lin > delta_bar; otherwise the
    proviso fails and eps* = 0.
    """
    if not np.array_equal(system.input_map, np.eye(system.n)):
        raise ValueError("the linearisation remainder enters every state directly; "
                         "nonlinear analysis needs the identity input map")
    lin_sys = linearize(system)
    corr = nonlinear_correction(system)
    lin = resilience_lower_bound(phi, lin_sys, x0, grid, cfg)
    extras = dict(lin.extras)
    extras.update({
        "eps_linear": lin.eps_star,
        "delta_bar": corr.delta_bar,
        "hessian_bound": corr.hessian_bound,
        "jacobian": lin_sys.A.tolist(),
        "eigenvalues": [[z.real, z.imag] for z in np.linalg.eigvals(lin_sys.A)],
    })
    if lin.status == "nominal_violation":
        status, eps = "nominal_violation", 0.0
    elif lin.eps_star > corr.delta_bar:
        status, eps = "certified", lin.eps_star - corr.delta_bar
    elif lin.eps_star == 0.0 and corr.delta_bar == 0.0:
        status, eps = lin.status, 0.0
    else:
        status, eps = "proviso_failed", 0.0
    return ResilienceCertificate(eps, lin.eta_star, lin.l_omega, lin.delta, lin.samples_used,
                                 lin.bisection_trace, lin.method, status, lin.rho_nominal,
                                 extras)
