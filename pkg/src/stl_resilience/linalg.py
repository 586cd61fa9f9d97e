"""Spectral decomposition and envelope gain matrices.

All three gain curves bound the deviation of a disturbed linear trajectory
from the nominal one:

    |x_d(t) - x_0(t)|  <=  G(t) |B| eps      (elementwise)

for any disturbance with ``|w(s)|_inf <= eps`` entering through ``B``.

* ``jordan``   G(t) = |P| J_R^{-1} (exp(J_R t) - I) |P^{-1}|
* ``absolute`` G(t) = At^{-1} (exp(At t) - I),  At = |P| |J| |P^{-1}|
* ``gronwall`` G(t) = (exp(L t) - 1) / L * ones,  L = ||A||_2
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DefectiveMatrix, SingularAbsoluteMatrix, SingularRealPart

COND_LIMIT = 1e10
RESIDUAL_LIMIT = 1e-8
REAL_PART_LIMIT = 1e-10
GAIN_KINDS = ("jordan", "absolute", "gronwall")


@dataclass(frozen=True)
class SpectralDecomposition:
    """A = P diag(eigenvalues) P^-1 with P the (possibly complex) eigenvector matrix.

    ``J_R`` holds the real parts of the eigenvalues on its diagonal. Because
    |exp(lambda t)| = exp(Re(lambda) t), we get |exp(At)| <= |P| exp(J_R t) |P^-1|
    elementwise, which is what the Jordan envelope relies on.
    """

    P: np.ndarray
    Pinv: np.ndarray
    J: np.ndarray
    J_R: np.ndarray
    eigenvalues: np.ndarray
    cond_P: float
    hurwitz: bool

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.P @ self.J @ self.Pinv).real


@dataclass(frozen=True)
class GainCurve:
    grid: np.ndarray  # (K,)
    gains: np.ndarray  # (K, n, n)
    kind: str

    def __post_init__(self):
        if self.kind not in GAIN_KINDS:
            raise ValueError(f"unknown gain kind {self.kind!r}")
        if self.gains.shape[0] != self.grid.shape[0]:
            raise ValueError("grid and gains disagree in length")

    def __len__(self):
        return self.grid.shape[0]


def _square(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


def expm(M) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    M = np.asarray(M, dtype=float)
    if M.shape[-1] != M.shape[-2]:
        raise ValueError(f"expm needs square matrices, got shape {M.shape}")
    return scipy.linalg.expm(M)


def decompose(A) -> SpectralDecomposition:
    A = _square(A, "A")
    if np.array_equal(A, A.T):
        lam, P = np.linalg.eigh(A)
        lam = lam.astype(complex)
        P = P.astype(complex)
    else:
        lam, P = np.linalg.eig(A)
        lam = lam.astype(complex)
        P = P.astype(complex)

    if np.any(np.abs(lam.real) < REAL_PART_LIMIT):
        raise SingularRealPart(f"eigenvalue with zero real part: {lam}")

    cond_P = float(np.linalg.cond(P))
    if not np.isfinite(cond_P) or cond_P > COND_LIMIT:
        raise DefectiveMatrix(f"eigenvector basis is ill conditioned (cond={cond_P:.3g})")
    Pinv = np.linalg.inv(P)
    J = np.diag(lam)
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    residual = np.linalg.norm(A - (P @ J @ Pinv)) / scale
    if residual > RESIDUAL_LIMIT:
        raise DefectiveMatrix(f"reconstruction residual {residual:.3g} too large")

    hurwitz = bool(np.all(lam.real < 0))
    if not hurwitz:
        warnings.warn("system matrix is not Hurwitz; envelopes grow without bound",
                      RuntimeWarning, stacklevel=2)
    return SpectralDecomposition(P=P, Pinv=Pinv, J=J, J_R=np.diag(lam.real),
                                 eigenvalues=lam, cond_P=cond_P, hurwitz=hurwitz)


def integrated_exponential(real_parts, t):
    """(exp(r t) - 1) / r for each r, vectorised over t. Shape (len(t), len(r))."""
    r = np.asarray(real_parts, dtype=float)
    t = np.asarray(t, dtype=float)[:, None]
    return np.expm1(r * t) / r


def jordan_gain(dec: SpectralDecomposition, grid) -> GainCurve:
    grid = np.asarray(grid, dtype=float)
    r = np.diag(dec.J_R)
    if np.any(np.abs(r) < REAL_PART_LIMIT):
        raise SingularRealPart("J_R is singular")
    f = integrated_exponential(r, grid)
    gains = np.einsum("ik,tk,kj->tij", np.abs(dec.P), f, np.abs(dec.Pinv))
    return GainCurve(grid=grid, gains=gains, kind="jordan")


def absolute_matrix(dec: SpectralDecomposition) -> np.ndarray:
    return np.abs(dec.P) @ np.abs(dec.J) @ np.abs(dec.Pinv)


def absolute_gain(A, dec: SpectralDecomposition, grid) -> GainCurve:
    A = _square(A, "A")
    if A.shape[0] != dec.n:
        raise ValueError("A and decomposition disagree in dimension")
    grid = np.asarray(grid, dtype=float)
    At = absolute_matrix(dec)
    if not np.all(np.isfinite(At)):
        raise SingularAbsoluteMatrix("|P||J||P^-1| has non-finite entries")
    n = dec.n
    # expm([[At, I], [0, 0]] t) carries the integral of exp(At s) over [0, t]
    # in its upper-right block. This equals At^-1 (exp(At t) - I) when At is
    # invertible and stays defined when it is not: a conjugate pair gives two
    # equal columns in |P|, so At is singular for every complex spectrum.
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = At
    aug[:n, n:] = np.eye(n)
    blocks = scipy.linalg.expm(aug[None, :, :] * grid[:, None, None])
    gains = np.maximum(blocks[:, :n, n:], 0.0)
    return GainCurve(grid=grid, gains=gains, kind="absolute")


def gronwall_gain(A, grid) -> GainCurve:
    """Grönwall baseline with the induced 2-norm as Lipschitz constant.

    |dx_i| <= ||dx||_2 <= sqrt(n) eps (e^{Lt} - 1)/L, and the all-ones gain
    applied to eps*1 gives n eps (e^{Lt} - 1)/L, so it dominates every coordinate.
    """
    A = _square(A, "A")
    grid = np.asarray(grid, dtype=float)
    L = float(np.linalg.norm(A, 2))
    scalar = np.expm1(L * grid) / L if L > 0 else grid.copy()
    n = A.shape[0]
    gains = scalar[:, None, None] * np.ones((1, n, n))
    return GainCurve(grid=grid, gains=gains, kind="gronwall")


def gain_curve(kind: str, A, grid, dec: SpectralDecomposition | None = None) -> GainCurve:
    if kind == "gronwall":
        return gronwall_gain(A, grid)
    if dec is None:
        dec = decompose(A)
    if kind == "jordan":
        return jordan_gain(dec, grid)
    if kind == "absolute":
        return absolute_gain(A, dec, grid)
    raise ValueError(f"unknown gain kind {kind!r}")
