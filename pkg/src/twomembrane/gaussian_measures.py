"""Entanglement, occupation and entropy of Gaussian states (vacuum = identity)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-9
CLAMP_TOL = 1e-8


class DegenerateCovarianceError(ArithmeticError):
    pass


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _check_symmetric(V):
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] % 2:
        raise ValueError("covariance must be a square matrix of even size")
    scale = max(np.max(np.abs(V)), 1.0)
    if np.max(np.abs(V - V.T)) > SYMMETRY_TOL * scale:
        raise ValueError("covariance matrix is not symmetric")
    return V


def symplectic_eigenvalues(V) -> np.ndarray:
    """Symplectic spectrum from the eigenvalues of ``i Omega V``, ascending."""
    V = _check_symmetric(V)
    n = V.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ V))
    return np.sort(ev)[::2]


def blocks(V4):
    V4 = np.asarray(V4, dtype=float)
    return V4[:2, :2], V4[2:, 2:], V4[:2, 2:]


def two_mode_symplectic_eigenvalues(V4) -> np.ndarray:
    """Closed-form symplectic eigenvalues of a two-mode covariance."""
    V4 = _check_symmetric(V4)
    a, b, c = blocks(V4)
    det = np.linalg.det(V4)
    s = np.linalg.det(a) + np.linalg.det(b) + 2 * np.linalg.det(c)
    disc = max(s * s - 4 * det, 0.0)
    hi2 = 0.5 * (s + math.sqrt(disc))
    lo2 = det / hi2
    return np.sqrt([lo2, hi2])


def partial_transpose_min(V4) -> float:
    """Smallest partially transposed symplectic eigenvalue, without cancellation."""
    V4 = _check_symmetric(V4)
    a, b, c = blocks(V4)
    det = np.linalg.det(V4)
    s = np.linalg.det(a) + np.linalg.det(b) - 2 * np.linalg.det(c)
    disc = s * s - 4 * det
    if det <= 0 or s <= 0:
        raise DegenerateCovarianceError("matrix is not positive definite")
    if disc < 0:
        if disc < -1e-10 * s * s:
            raise DegenerateCovarianceError(f"negative discriminant {disc:.3g}")
        disc = 0.0
    # nu^2 = (s - sqrt(disc))/2 rewritten as 2 det / (s + sqrt(disc))
    return math.sqrt(2 * det / (s + math.sqrt(disc)))


def log_negativity(V4, base: float = math.e) -> float:
    return max(0.0, signed_log_negativity(V4, base))


def signed_log_negativity(V4, base: float = math.e) -> float:
    """``-log(nu~_min)`` without the clip at zero; negative for separable states."""
    return -math.log(partial_transpose_min(V4)) / math.log(base)


def log_negativity_eig(V4, base: float = math.e) -> float:
    """General-eigensolver route through the mirrored second mode."""
    P = np.diag([1.0, 1.0, 1.0, -1.0])
    nu = symplectic_eigenvalues(P @ np.asarray(V4) @ P)[0]
    return max(0.0, -math.log(nu)) / math.log(base)


def ppt_violation(V4) -> float:
    """Minimum eigenvalue of the partially transposed uncertainty matrix; negative means entangled."""
    P = np.diag([1.0, 1.0, 1.0, -1.0])
    Vt = P @ np.asarray(V4) @ P
    return float(np.min(np.linalg.eigvalsh(Vt + 1j * symplectic_form(2))))


def uncertainty_min_eig(V) -> float:
    V = np.asarray(V)
    return float(np.min(np.linalg.eigvalsh(V + 1j * symplectic_form(V.shape[0] // 2))))


def phonon_numbers(V) -> np.ndarray:
    """``n_j = (V_qq + V_pp)/4 - 1/2`` for both membranes."""
    V = np.asarray(V)
    return np.array([(V[0, 0] + V[1, 1]) / 4 - 0.5, (V[2, 2] + V[3, 3]) / 4 - 0.5])


def _entropy_term(nu: float) -> float:
    if nu <= 1.0:
        return 0.0
    a, b = (nu + 1) / 2, (nu - 1) / 2
    return a * math.log2(a) - b * math.log2(b)


def entropy_mechanical(V4) -> float:
    """Von Neumann entropy of the two-mode state in bits."""
    # the closed form loses sqrt(eps) when both eigenvalues meet (pure states); eig does not
    nus = symplectic_eigenvalues(V4)
    if np.any(nus < 1 - CLAMP_TOL):
        raise ValueError(f"unphysical symplectic eigenvalue {nus.min():.12g}")
    return float(sum(_entropy_term(max(float(n), 1.0)) for n in nus))


@dataclass
class MechanicalDiagnostics:
    E_N: float
    n1: float
    n2: float
    S_m: float
    E_N_signed: float


def diagnostics(V, log_base: float = math.e) -> MechanicalDiagnostics:
    V4 = np.asarray(V)[:4, :4]
    n1, n2 = phonon_numbers(V4)
    signed = signed_log_negativity(V4, log_base)
    return MechanicalDiagnostics(max(0.0, signed), float(n1), float(n2), entropy_mechanical(V4), signed)
