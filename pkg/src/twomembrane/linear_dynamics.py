"""Linearized fluctuation dynamics and the steady-state covariance matrix.

State ordering is (q1, p1, q2, p2, X_1, Y_1, X_2, Y_2, ...) with one
quadrature pair per optical mode; the first two optical modes are the driven
b and c modes.  Column convention: ``dx/dt = A x + noise``.  Covariances use
``V_ij = <{dx_i, dx_j}>`` so that vacuum is the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .core import SystemParams
from .semiclassical import WorkingPoint

SQRT2 = math.sqrt(2.0)
LYAPUNOV_TOL = 1e-10
SLOW_RATE_LIMIT = 1e3


class NoSteadyStateError(ArithmeticError):
    def __init__(self, record: "StabilityRecord"):
        super().__init__(f"drift matrix is unstable (max Re lambda = {record.spectral_abscissa:.6g} 1/s)")
        self.record = record


@dataclass
class LinearSystem:
    A: np.ndarray
    D: np.ndarray
    labels: tuple[str, ...]

    @property
    def n_optical(self) -> int:
        return (self.A.shape[0] - 4) // 2


@dataclass
class StabilityRecord:
    eigenvalues: np.ndarray = field(repr=False)
    spectral_abscissa: float

    @property
    def stable(self) -> bool:
        return bool(self.spectral_abscissa < 0)

    @property
    def settling_time(self) -> float:
        return 1.0 / abs(self.spectral_abscissa) if self.spectral_abscissa != 0 else math.inf

    @property
    def slow_rate_below_1khz(self) -> bool:
        return bool(abs(self.spectral_abscissa) < SLOW_RATE_LIMIT)


@dataclass
class CovarianceState:
    V: np.ndarray
    stability: StabilityRecord
    residual: float

    @property
    def residual_ok(self) -> bool:
        return self.residual <= LYAPUNOV_TOL

    @property
    def mechanical(self) -> np.ndarray:
        return self.V[:4, :4]


def state_labels(n_optical: int) -> tuple[str, ...]:
    names = ["q1", "p1", "q2", "p2"]
    tags = ["b", "c"] + [f"y{i}" for i in range(1, max(n_optical - 1, 1))]
    for i in range(n_optical):
        names += [f"X_{tags[i]}", f"Y_{tags[i]}"]
    return tuple(names)


def assemble_drift(omega_m, gamma, c, mu, Gamma, xi) -> np.ndarray:
    """Drift matrix for two membranes coupled to any number of optical modes.

    ``c``, ``mu``, ``Gamma`` have one entry per optical mode and ``xi`` is
    the matching (modes x 2) array of scaled couplings.
    """
    c = np.asarray(c, dtype=complex)
    mu = np.asarray(mu, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    xi = np.asarray(xi, dtype=float).reshape(len(c), 2)
    N = 4 + 2 * len(c)
    A = np.zeros((N, N))
    for j in range(2):
        q, p = 2 * j, 2 * j + 1
        A[q, p] = omega_m
        A[p, q] = -omega_m
        A[p, p] = -0.5 * gamma
    for x in range(len(c)):
        X, Y = 4 + 2 * x, 5 + 2 * x
        A[X, X] = A[Y, Y] = -0.5 * Gamma[x]
        A[X, Y] = mu[x]
        A[Y, X] = -mu[x]
        for j in range(2):
            q, p = 2 * j, 2 * j + 1
            g = SQRT2 * xi[x, j]
            A[p, X] = -g * c[x].real
            A[p, Y] = -g * c[x].imag
            A[X, q] = g * c[x].imag
            A[Y, q] = -g * c[x].real
    return A


def assemble_diffusion(gamma, n_bath, Gamma) -> np.ndarray:
    Gamma = np.asarray(Gamma, dtype=float)
    d = [0.0, gamma * (2 * n_bath + 1), 0.0, gamma * (2 * n_bath + 1)]
    for g in Gamma:
        d += [g, g]
    return np.diag(d)


def build_diffusion(params: SystemParams) -> np.ndarray:
    return assemble_diffusion(params.gamma, params.n_bath, params.Gammas)


def build_drift(wp: WorkingPoint, xi, params: SystemParams) -> LinearSystem:
    A = assemble_drift(params.omega_m, params.gamma, wp.c, wp.mu, params.Gammas, xi)
    return LinearSystem(A, build_diffusion(params), state_labels(2))


def langevin_rhs(state, omega_m, gamma, Delta, Gamma, xi, rabi):
    """Noise-free nonlinear equations of motion in real coordinates.

    ``state`` is (q1, p1, q2, p2, X_1, Y_1, ...) where ``X + iY = sqrt(2) a``
    for the full (not fluctuation) field amplitudes.
    """
    s = np.asarray(state, dtype=float)
    xi = np.asarray(xi, dtype=float)
    q = s[[0, 2]]
    p = s[[1, 3]]
    a = (s[4::2] + 1j * s[5::2]) / SQRT2
    out = np.empty_like(s)
    force = -xi.T @ np.abs(a) ** 2
    out[[0, 2]] = omega_m * p
    out[[1, 3]] = -omega_m * q - 0.5 * gamma * p + force
    adot = -(0.5 * np.asarray(Gamma) + 1j * np.asarray(Delta)) * a - 1j * (xi @ q) * a \
        - 0.5j * np.conj(np.asarray(rabi, dtype=complex))
    out[4::2] = SQRT2 * adot.real
    out[5::2] = SQRT2 * adot.imag
    return out


def stability(A) -> StabilityRecord:
    ev = np.linalg.eigvals(np.asarray(A))
    return StabilityRecord(ev, float(np.max(ev.real)))


def _residual_ext(A, V, D):
    # the residual cancels strongly near the stability edge; form it in extended precision
    Al = A.astype(np.longdouble)
    Vl = V.astype(np.longdouble)
    return Al @ Vl + Vl @ Al.T + D


def lyapunov_residual(A, V, D) -> float:
    R = _residual_ext(np.asarray(A), np.asarray(V), np.asarray(D))
    return float(np.sqrt(np.sum(R * R)) / np.linalg.norm(D))


def steady_covariance(system: LinearSystem, refine: int = 3) -> CovarianceState:
    """Solve ``A V + V A^T = -D`` for a stable drift matrix.

    Schur-based solve followed by up to ``refine`` steps of iterative
    refinement on an extended-precision residual, kept while they reduce it.  The achieved relative
    residual is stored; ``residual_ok`` tells whether it met the tolerance.
    """
    A, D = system.A, system.D
    rec = stability(A)
    if not rec.stable:
        raise NoSteadyStateError(rec)
    V = solve_continuous_lyapunov(A, -D)
    V = 0.5 * (V + V.T)
    res = lyapunov_residual(A, V, D)
    # the residual is relative to the whole of D, so a small mechanical block can hide
    # relative errors near cond(A) * eps; refine while it still helps
    for _ in range(refine):
        if res == 0.0:
            break
        R = np.asarray(_residual_ext(A, V, D), dtype=float)
        dV = solve_continuous_lyapunov(A, -R)
        trial = V + 0.5 * (dV + dV.T)
        res_trial = lyapunov_residual(A, trial, D)
        if res_trial >= res:
            break
        V, res = trial, res_trial
    return CovarianceState(V, rec, res)
