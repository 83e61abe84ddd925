"""Mechanical-only model after eliminating the fast optical modes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian_measures import log_negativity
from .semiclassical import WorkingPoint

VALIDITY_WARN_RATIO = 0.3


class PoleError(ZeroDivisionError):
    pass


class EffectiveModelUnstable(ArithmeticError):
    pass


@dataclass
class EffectiveCouplings:
    nu1: float
    nu2: float
    nu12: float
    ratios: np.ndarray  # |xi_xj c_x| / |mu_x|, shape (modes, 2)

    @property
    def valid(self) -> bool:
        return bool(np.all(self.ratios < VALIDITY_WARN_RATIO))


def effective_couplings(wp: WorkingPoint, xi) -> EffectiveCouplings:
    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(wp.mu, dtype=float)
    if np.any(mu == 0):
        raise PoleError("effective couplings diverge at mu = 0")
    n = np.abs(wp.c) ** 2
    nu1 = -2 * np.sum(xi[:, 0] ** 2 * n / mu)
    nu2 = -2 * np.sum(xi[:, 1] ** 2 * n / mu)
    nu12 = -4 * np.sum(xi[:, 0] * xi[:, 1] * n / mu)
    ratios = np.abs(xi * np.abs(wp.c)[:, None]) / np.abs(mu)[:, None]
    return EffectiveCouplings(float(nu1), float(nu2), float(nu12), ratios)


def stiffness(eff: EffectiveCouplings, omega_m: float) -> np.ndarray:
    return np.array([[omega_m + eff.nu1, eff.nu12 / 2], [eff.nu12 / 2, omega_m + eff.nu2]])


def ground_state_covariance(eff: EffectiveCouplings, omega_m: float) -> np.ndarray:
    """Ground state of ``omega_m/2 (p1^2 + p2^2) + q^T K q / 2`` in (q1, p1, q2, p2) order."""
    K = stiffness(eff, omega_m)
    lam, R = np.linalg.eigh(K)
    if lam[0] <= 0:
        raise EffectiveModelUnstable(f"stiffness not positive definite (eigenvalues {lam})")
    Vq = R @ np.diag(np.sqrt(omega_m / lam)) @ R.T
    Vp = R @ np.diag(np.sqrt(lam / omega_m)) @ R.T
    V = np.zeros((4, 4))
    V[np.ix_([0, 2], [0, 2])] = Vq
    V[np.ix_([1, 3], [1, 3])] = Vp
    return V


def ground_state_entanglement(eff: EffectiveCouplings, omega_m: float, base: float = math.e) -> float:
    return log_negativity(ground_state_covariance(eff, omega_m), base)


def normal_frequencies(eff: EffectiveCouplings, omega_m: float) -> np.ndarray:
    lam = np.linalg.eigvalsh(stiffness(eff, omega_m))
    if lam[0] <= 0:
        raise EffectiveModelUnstable(f"stiffness not positive definite (eigenvalues {lam})")
    return np.sqrt(omega_m * lam)
