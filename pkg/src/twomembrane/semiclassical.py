"""Classical operating point of the driven two-mode, two-membrane system.

Couplings are passed as a 2x2 array ``xi[x, j]`` of scaled rates (1/s),
mode index x in (b, c) and membrane index j in (1, 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import SystemParams, ValidityReport, field_from_rabi, rabi_from_field, validate

LINEAR_REGIME_MIN_FIELD = 10.0


@dataclass
class WorkingPoint:
    c: np.ndarray  # complex steady fields (b, c)
    Q: np.ndarray  # static membrane shifts in x_zpf units
    mu: np.ndarray  # effective detunings, 1/s
    rabi: np.ndarray  # complex drive amplitudes, 1/s
    Delta: np.ndarray
    validity: ValidityReport | None = field(default=None, repr=False)

    @property
    def linear_regime(self) -> bool:
        return bool(np.all(np.abs(self.c) > LINEAR_REGIME_MIN_FIELD))


@dataclass
class ForwardResult:
    points: list[WorkingPoint]
    mu_box: np.ndarray  # [[lo_b, hi_b], [lo_c, hi_c]] searched
    Q_box: np.ndarray

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]


def static_shift(c, xi, omega_m):
    """``Q_j = -sum_x xi_xj |c_x|^2 / omega_m``."""
    return -(np.asarray(xi).T @ np.abs(np.asarray(c)) ** 2) / omega_m


def solve_inverse(c, Delta, xi, params: SystemParams, modes=None) -> WorkingPoint:
    """Operating point for prescribed steady fields (complex allowed; magnitudes used for Q)."""
    c = np.asarray(c, dtype=complex).reshape(2)
    Delta = np.asarray(Delta, dtype=float).reshape(2)
    xi = np.asarray(xi, dtype=float)
    Q = static_shift(c, xi, params.omega_m)
    mu = Delta + xi @ Q
    rabi = np.array([rabi_from_field(c[i], mu[i], params.Gammas[i]) for i in range(2)])
    wp = WorkingPoint(c, Q, mu, rabi, Delta)
    if modes is not None:
        wp.validity = validate(params, modes, rabi=np.abs(rabi))
    return wp


def _occupations(rabi_abs2, mu, gamma):
    return rabi_abs2 / (4.0 * (mu ** 2 + 0.25 * gamma ** 2))


def _sinh_grid(lo, hi, scale, num):
    u = np.linspace(math.asinh(lo / scale), math.asinh(hi / scale), num)
    return scale * np.sinh(u)


def _scan_roots(f, grid):
    v = f(grid)
    idx = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) <= 0)[0]
    out = []
    for k in idx:
        a, b = grid[k], grid[k + 1]
        if v[k] == 0:
            out.append(a)
        elif v[k + 1] != 0:
            out.append(brentq(f, a, b, xtol=1e-12 * max(abs(a), abs(b), 1.0), rtol=1e-15))
    return out


def _curve_seeds(r2, Delta, M, gam, mu_box, scale, num=20001):
    """Roots of the reduced equations along a one-parameter curve.

    The occupations are affine in the detunings, ``n = K (Delta - mu)`` with
    ``K = M^-1``.  Row i of that relation, with ``n_i`` from the Lorentzian,
    fixes ``mu_j`` as an explicit function of ``mu_i``; row j then leaves a
    scalar equation in ``mu_i``, scanned on a dense grid and refined by Brent.
    """
    if np.linalg.cond(M) > 1e12:
        return []
    K = np.linalg.inv(M)
    seeds = []
    if np.all(np.abs(K[[0, 1], [1, 0]]) <= 1e-12 * np.max(np.abs(K))):
        # decoupled rows: each detuning solves its own equation
        roots = []
        for i in range(2):
            def f(m, i=i):
                return r2[i] - 4 * (m ** 2 + 0.25 * gam[i] ** 2) * K[i, i] * (Delta[i] - m)
            roots.append(_scan_roots(f, _sinh_grid(*mu_box[i], scale[i], num)))
        return [np.array([a, b]) for a in roots[0] for b in roots[1]]
    for i, j in ((0, 1), (1, 0)):
        if abs(K[i, j]) <= 1e-12 * np.max(np.abs(K)):
            continue

        def other(m, i=i, j=j):
            n_i = _occupations(r2[i], m, gam[i])
            return Delta[j] - (n_i - K[i, i] * (Delta[i] - m)) / K[i, j]

        def f(m, i=i, j=j):
            mj = other(m)
            return r2[j] - 4 * (mj ** 2 + 0.25 * gam[j] ** 2) * (K[j, i] * (Delta[i] - m) + K[j, j] * (Delta[j] - mj))

        for m in _scan_roots(f, _sinh_grid(*mu_box[i], scale[i], num)):
            mu = np.empty(2)
            mu[i], mu[j] = m, other(m)
            seeds.append(mu)
    return seeds


def solve_forward(rabi, Delta, xi, params: SystemParams, grid: int = 200, box_factor: float = 10.0,
                  tol: float = 1e-10) -> ForwardResult:
    """All classical operating points reached by the given drives.

    The reduced system is solved in the effective detunings: for fixed mu
    each field follows from its own drive, so
    ``G(mu) = mu - Delta + xi xi^T n(mu) / omega_m`` vanishes at a solution.
    Cells of a sinh-spaced grid where both components of G change sign seed
    a damped Newton iteration.
    """
    rabi = np.asarray(rabi, dtype=complex).reshape(2)
    Delta = np.asarray(Delta, dtype=float).reshape(2)
    xi = np.asarray(xi, dtype=float)
    gam = params.Gammas
    wm = params.omega_m
    r2 = np.abs(rabi) ** 2
    M = xi @ xi.T / wm

    n_max = r2 / gam ** 2
    Q_box = box_factor * (np.abs(xi).T @ n_max) / wm
    R = np.abs(xi) @ Q_box
    mu_box = np.column_stack([Delta - R - gam, Delta + R + gam])

    def G(mu):
        n = _occupations(r2, mu, gam)
        return mu - Delta + M @ n

    def J(mu):
        n = _occupations(r2, mu, gam)
        dn = -2.0 * mu * n / (mu ** 2 + 0.25 * gam ** 2)
        return np.eye(2) + M * dn[None, :]

    scale = 0.5 * gam
    axes = [_sinh_grid(mu_box[i, 0], mu_box[i, 1], scale[i], grid) for i in range(2)]
    mb, mc = np.meshgrid(axes[0], axes[1], indexing="ij")
    nb = _occupations(r2[0], mb, gam[0])
    nc = _occupations(r2[1], mc, gam[1])
    g0 = mb - Delta[0] + M[0, 0] * nb + M[0, 1] * nc
    g1 = mc - Delta[1] + M[1, 0] * nb + M[1, 1] * nc

    def changes(g):
        s = np.sign(g)
        corners = np.stack([s[:-1, :-1], s[1:, :-1], s[:-1, 1:], s[1:, 1:]])
        return corners.min(axis=0) != corners.max(axis=0)

    cells = np.argwhere(changes(g0) & changes(g1))
    seeds = [np.array([0.5 * (axes[0][i] + axes[0][i + 1]), 0.5 * (axes[1][j] + axes[1][j + 1])]) for i, j in cells]
    # the 2-D cell test misses roots whose zero curves enter and leave one cell
    seeds += _curve_seeds(r2, Delta, M, gam, mu_box, scale)
    if not seeds:
        seeds = [Delta.copy()]

    sols = []
    ref = np.maximum(np.maximum(np.abs(Delta), gam), 1.0)
    for mu in seeds:
        for _ in range(100):
            g = G(mu)
            if np.all(np.abs(g) < tol * np.maximum(ref, np.abs(mu))):
                break
            try:
                step = np.linalg.solve(J(mu), -g)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            gn = np.linalg.norm(g)
            while lam > 1e-6 and np.linalg.norm(G(mu + lam * step)) >= gn:
                lam *= 0.5
            mu = mu + lam * step
        if np.all(np.abs(G(mu)) < tol * np.maximum(ref, np.abs(mu))):
            # near a fold det(J) is small, so polish before comparing roots
            for _ in range(3):
                try:
                    mu = mu + np.linalg.solve(J(mu), -G(mu))
                except np.linalg.LinAlgError:
                    break
            if not any(np.allclose(mu, s, rtol=1e-7, atol=1e-7 * gam.max()) for s in sols):
                sols.append(mu)

    points = []
    for mu in sols:
        c = np.array([field_from_rabi(rabi[i], mu[i], gam[i]) for i in range(2)])
        points.append(solve_inverse(c, Delta, xi, params))
    points.sort(key=lambda wp: (wp.Q[0], wp.Q[1]))
    return ForwardResult(points, mu_box, Q_box)


def forward_residual(wp: WorkingPoint, xi, params: SystemParams) -> float:
    """Relative residual of the steady-state equations at a working point."""
    xi = np.asarray(xi)
    mu = wp.Delta + xi @ wp.Q
    res_mu = np.abs(mu - wp.mu) / np.maximum(np.abs(wp.mu), params.Gammas)
    c = np.array([field_from_rabi(wp.rabi[i], mu[i], params.Gammas[i]) for i in range(2)])
    res_c = np.abs(c - wp.c) / np.maximum(np.abs(wp.c), 1e-300)
    res_c[np.abs(wp.c) == 0] = np.abs(c[np.abs(wp.c) == 0])
    Q = static_shift(c, xi, params.omega_m)
    res_q = np.abs(Q - wp.Q) / np.maximum(np.abs(wp.Q), 1e-300)
    res_q[wp.Q == 0] = np.abs(Q[wp.Q == 0])
    return float(max(res_mu.max(), res_c.max(), res_q.max()))
