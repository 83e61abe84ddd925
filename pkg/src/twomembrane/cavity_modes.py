"""Optical resonances of a cavity with two partially transmitting membranes.

The rigid mirrors sit at -3L and +3L.  Everything internal works in the
scaled wavenumber ``kappa = k L`` and scaled positions ``s_j = q_j / L`` so
that the trigonometric arguments stay well conditioned.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .core import C_LIGHT, SystemParams

BRANCHES = ("a", "b", "bp", "c")

# c-ladder spacing in kappa; the scan step is a fixed fraction of it
C_SPACING = math.pi / 3
SCAN_FRACTION = 1e-3
FD_STEPS = (4e-3, 2e-3, 1e-3)


class SingularDerivativeError(ArithmeticError):
    pass


@dataclass(frozen=True)
class CavityGeometry:
    L: float
    T_mem: float
    q1: float
    q2: float

    def __post_init__(self):
        if not (-3 * self.L < self.q1 < self.q2 < 3 * self.L):
            raise ValueError("membranes must satisfy -3L < q1 < q2 < 3L")
        if not 0 < self.T_mem < 1:
            raise ValueError("T_mem must lie in (0, 1)")

    @classmethod
    def at_rest(cls, params: SystemParams) -> "CavityGeometry":
        return cls(params.L, params.T_mem, params.q01, params.q02)

    @property
    def eta(self) -> float:
        return 2.0 * math.sqrt((1.0 - self.T_mem) / self.T_mem)

    @property
    def s1(self) -> float:
        return self.q1 / self.L

    @property
    def s2(self) -> float:
        return self.q2 / self.L

    @property
    def is_default(self) -> bool:
        return math.isclose(self.s1, -1.0, abs_tol=1e-12) and math.isclose(self.s2, 2.0, abs_tol=1e-12)

    def moved(self, dq1: float = 0.0, dq2: float = 0.0) -> "CavityGeometry":
        return CavityGeometry(self.L, self.T_mem, self.q1 + dq1, self.q2 + dq2)


@dataclass
class CavityMode:
    branch: str | None
    index: int | None
    k: float
    xi: tuple[float, float] | None = None
    xi_scaled: tuple[float, float] | None = None

    @property
    def omega(self) -> float:
        return self.k * C_LIGHT


@dataclass
class LadderFit:
    theta: float
    residual: float
    consistent: bool
    roots: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


def residual_scaled(kappa, eta, s1, s2):
    """Resonance condition in scaled variables; works on arrays and complex input."""
    a = 3.0 * kappa
    x1 = kappa * s1
    x2 = kappa * s2
    ca, sa = np.cos(a), np.sin(a)
    return ((ca - eta * np.cos(x1) * np.sin(x1 + a)) * (sa + eta * np.sin(x2) * np.sin(x2 - a))
            + (ca + eta * np.cos(x2) * np.sin(x2 - a)) * (sa + eta * np.sin(x1) * np.sin(x1 + a)))


def resonance_residual(k, geom: CavityGeometry):
    """Value of the transcendental resonance condition at wavenumber ``k``."""
    return residual_scaled(np.asarray(k) * geom.L, geom.eta, geom.s1, geom.s2)


def _scan_roots(geom: CavityGeometry, lo: float, hi: float, step: float):
    """Bracket and refine all sign changes of the residual for kappa in [lo, hi]."""
    npts = max(int(math.ceil((hi - lo) / step)) + 1, 3)
    grid = np.linspace(lo, hi, npts)
    f = residual_scaled(grid, geom.eta, geom.s1, geom.s2)
    roots = []
    exact = np.flatnonzero(f == 0.0)
    roots.extend(grid[exact])
    sgn = np.sign(f)
    idx = np.flatnonzero(sgn[:-1] * sgn[1:] < 0)
    args = (geom.eta, geom.s1, geom.s2)
    for i in idx:
        roots.append(brentq(residual_scaled, grid[i], grid[i + 1], args=args, xtol=1e-14, rtol=4 * np.finfo(float).eps))
    # a tangent pair of roots shows up as a near-zero local minimum without a sign change
    absf = np.abs(f)
    interior = np.flatnonzero((absf[1:-1] < absf[:-2]) & (absf[1:-1] < absf[2:])) + 1
    for i in interior:
        if sgn[i - 1] == sgn[i] == sgn[i + 1] and absf[i] < 1e-3 * max(1.0, geom.eta ** 2):
            warnings.warn(f"possible degenerate resonance near kappa={grid[i]:.9f}", RuntimeWarning, stacklevel=3)
    return np.sort(np.asarray(roots, dtype=float))


def _ladder_offsets(theta: float) -> dict[str, float]:
    """Offsets of the b, b' and c (m = 3n) roots from n*pi in kappa."""
    half = 0.5 * math.acos(-math.cos(theta) / 2.0)
    return {"a": 0.0, "b": -theta / 2 + half, "bp": -theta / 2 - half, "c": math.pi / 6 - theta / 3}


def ladder_kappa(branch: str, index: int, theta: float) -> float:
    """Closed-form resonance of the default geometry, as scaled wavenumber."""
    if branch == "c":
        return index * math.pi / 3 + math.pi / 6 - theta / 3
    return index * math.pi + _ladder_offsets(theta)[branch]


def fit_theta(geom: CavityGeometry, n_index: int, m_index: int | None = None) -> LadderFit:
    """Fit the ladder angle to the numeric c root and cross-check it on b and b'.

    Every root near the c prediction is tried as the c resonance; the one
    whose implied angle also places the b and b' roots best wins.  The
    residual is measured in units of the c-ladder spacing.
    """
    m = 3 * n_index if m_index is None else m_index
    kc = m * math.pi / 3
    kn = n_index * math.pi
    lo = min(kc, kn) - math.pi
    hi = max(kc, kn) + math.pi
    roots = _scan_roots(geom, lo, hi, SCAN_FRACTION * C_SPACING)
    best = None
    for r in roots:
        if abs(r - kc - math.pi / 6) > math.pi / 6:
            continue
        theta = 3.0 * (kc + math.pi / 6 - r)
        if not 0.0 < theta < math.pi:
            continue
        off = _ladder_offsets(theta)
        res = 0.0
        for br in ("b", "bp"):
            res = max(res, np.min(np.abs(roots - (kn + off[br]))))
        res /= C_SPACING
        if best is None or res < best[1]:
            best = (theta, res)
    if best is None:
        return LadderFit(float("nan"), float("inf"), False, roots)
    return LadderFit(best[0], best[1], best[1] < 1e-3, roots)


def _label(kappa: float, fit: LadderFit, n_guess: int) -> tuple[str | None, int | None]:
    if not fit.consistent:
        return None, None
    best = (None, None, math.inf)
    for n in (n_guess - 1, n_guess, n_guess + 1):
        for br in ("a", "b", "bp"):
            d = abs(kappa - ladder_kappa(br, n, fit.theta))
            if d < best[2]:
                best = (br, n, d)
    m_guess = int(round((kappa - math.pi / 6 + fit.theta / 3) / (math.pi / 3)))
    for m in (m_guess - 1, m_guess, m_guess + 1):
        d = abs(kappa - ladder_kappa("c", m, fit.theta))
        # ties go to the lower-frequency label, which the a/b/b' pass saw first
        if d < best[2] - 1e-12:
            best = ("c", m, d)
    return best[0], best[1]


def find_resonances(geom: CavityGeometry, k_center: float, window: float) -> list[CavityMode]:
    """All resonances with ``|k - k_center| <= window / 2``, ascending.

    Labels come from the closed-form ladder after fitting the angle; they are
    only assigned for the default rest geometry (-L, 2L).
    """
    lo = (k_center - window / 2) * geom.L
    hi = (k_center + window / 2) * geom.L
    roots = _scan_roots(geom, lo, hi, SCAN_FRACTION * C_SPACING)
    n_guess = max(int(round(k_center * geom.L / math.pi)), 1)
    if geom.is_default:
        fit = fit_theta(geom, n_guess)
    else:
        fit = LadderFit(float("nan"), float("inf"), False)
    modes = []
    for r in roots:
        br, idx = _label(r, fit, n_guess)
        modes.append(CavityMode(br, idx, r / geom.L))
    return modes


@lru_cache(maxsize=256)
def _cached_fit(geom: CavityGeometry, n_index: int, m_index: int) -> LadderFit:
    return fit_theta(geom, n_index, m_index)


def find_mode(geom: CavityGeometry, branch: str, index: int, n_ref: int | None = None) -> CavityMode:
    """Locate one labelled resonance of the default geometry by its ladder index."""
    if branch not in BRANCHES:
        raise ValueError(f"unknown branch {branch!r}")
    if branch == "c":
        n = n_ref if n_ref is not None else max(int(round(index / 3)), 1)
        fit = _cached_fit(geom, n, index)
    else:
        n = index
        fit = _cached_fit(geom, index, 3 * index)
    if not fit.consistent:
        raise ValueError(f"ladder fit inconsistent (residual {fit.residual:.3g}); cannot label roots")
    guess = ladder_kappa(branch, index, fit.theta)
    half = 0.25 * C_SPACING
    roots = _scan_roots(geom, guess - half, guess + half, SCAN_FRACTION * C_SPACING)
    if roots.size == 0:
        raise ValueError(f"no resonance near the {branch}{index} ladder prediction")
    r = roots[np.argmin(np.abs(roots - guess))]
    return CavityMode(branch, index, r / geom.L)


def _richardson_central(fun, x0: float, steps) -> tuple[float, float]:
    """Central differences at three steps, combined pairwise by Richardson.

    Returns the finest extrapolated value and the relative disagreement
    between the two extrapolations.
    """
    d = []
    for h in steps:
        # use the step actually representable at x0, which matters at large kappa
        hp = (x0 + h) - x0
        hm = x0 - (x0 - h)
        d.append((fun(x0 + hp) - fun(x0 - hm)) / (hp + hm))
    ext = []
    for (h1, d1), (h2, d2) in zip(zip(steps, d), zip(steps[1:], d[1:])):
        r = (h1 / h2) ** 2
        ext.append((r * d2 - d1) / (r - 1))
    spread = abs(ext[-1] - ext[0]) / max(abs(ext[-1]), 1e-300)
    return ext[-1], spread


def residual_gradient(kappa: float, geom: CavityGeometry, steps=FD_STEPS):
    """Finite-difference ``(df/dkappa, df/ds1, df/ds2)`` with their spreads."""
    eta, s1, s2 = geom.eta, geom.s1, geom.s2
    # the phases move kappa times faster in s than in kappa, so the s steps shrink by kappa
    s_steps = [h / max(abs(kappa), 1.0) for h in steps]
    dk, sk = _richardson_central(lambda x: residual_scaled(x, eta, s1, s2), kappa, steps)
    d1, sp1 = _richardson_central(lambda x: residual_scaled(kappa, eta, x, s2), s1, s_steps)
    d2, sp2 = _richardson_central(lambda x: residual_scaled(kappa, eta, s1, x), s2, s_steps)
    return np.array([dk, d1, d2]), np.array([sk, sp1, sp2])


def couplings_numeric(geom: CavityGeometry, mode: CavityMode, x_zpf: float | None = None, steps=FD_STEPS):
    """Linear optomechanical couplings ``d omega / d q_j`` of one resonance.

    Uses implicit differentiation of the resonance condition, so no roots
    are re-solved for displaced membranes.  Returns the mode with ``xi``
    (1/(s m)) filled in, plus ``xi_scaled`` (1/s) when ``x_zpf`` is given.
    """
    kappa = mode.k * geom.L
    grad, spread = residual_gradient(kappa, geom, steps)
    dk, d1, d2 = grad
    # |df/dkappa| is O(eta^2) at a simple root; a small value means a grazing root
    if abs(dk) < 1e-9 * max(1.0, geom.eta ** 2):
        raise SingularDerivativeError(f"df/dkappa ~ 0 at kappa={kappa:.9f}")
    # dkappa/ds_j = -(df/ds_j)/(df/dkappa); omega = c kappa / L, q_j = L s_j
    scale = C_LIGHT / geom.L ** 2
    xi = (-scale * d1 / dk, -scale * d2 / dk)
    out = CavityMode(mode.branch, mode.index, mode.k, xi)
    if x_zpf is not None:
        out.xi_scaled = (xi[0] * x_zpf, xi[1] * x_zpf)
    return out


def couplings_analytic(T_mem: float, n_index: int, m_index: int, L: float):
    """Leading-order-in-T closed forms ``(xi_b1, xi_b2, xi_c1, xi_c2)`` in 1/(s m)."""
    if T_mem > 0.3:
        warnings.warn("analytic couplings are O(T) truncations; T_mem > 0.3 is outside their range",
                      RuntimeWarning, stacklevel=2)
    bscale = n_index * math.pi * C_LIGHT / L ** 2
    cscale = m_index * math.pi * C_LIGHT / L ** 2
    xb1 = (1 / 10 + 3 * T_mem / 400) * bscale
    xb2 = (2 / 5 - 39 * T_mem / 200) * bscale
    xc1 = -(4 / 45 - 28 * T_mem / 675) * cscale
    return xb1, xb2, xc1, -xc1


@lru_cache(maxsize=512)
def _driven_couplings(L, T_mem, q01, q02, n_index, m_index):
    geom = CavityGeometry(L, T_mem, q01, q02)
    b = couplings_numeric(geom, find_mode(geom, "b", n_index))
    c = couplings_numeric(geom, find_mode(geom, "c", m_index, n_ref=n_index))
    return np.array([b.xi, c.xi]), b.omega, c.omega


def driven_couplings(params: SystemParams) -> np.ndarray:
    """Physical couplings of the driven (b, c) modes as a 2x2 array [mode, membrane]."""
    xi, _, _ = _driven_couplings(params.L, params.T_mem, params.q01, params.q02, params.n_index, params.m_index)
    return xi.copy()


def driven_frequencies(params: SystemParams) -> dict[str, float]:
    """Resonance frequencies of the a, b and c modes at rest (angular, 1/s)."""
    _, wb, wc = _driven_couplings(params.L, params.T_mem, params.q01, params.q02, params.n_index, params.m_index)
    return {"a": params.n_index * math.pi * C_LIGHT / params.L, "b": wb, "c": wc}


def leading_order_separation(T_mem: float, L: float) -> float:
    """``(5/12) c sqrt(T) / L``, the small-T estimate of ``|omega_b - omega_c|``."""
    return 5.0 / 12.0 * C_LIGHT * math.sqrt(T_mem) / L


# rounded couplings of the default device (T_mem=0.2, L=1 mm, n=2000, m=6000), 1/s
ROUNDED_XI_SCALED = np.array([[1.90e3, 6.75e3], [-4.53e3, 4.53e3]])

COUPLING_SOURCES = ("fixed", "numeric", "analytic")


def scaled_couplings(params: SystemParams, source: str = "numeric") -> np.ndarray:
    """Scaled couplings as a 2x2 array ``xi[mode, membrane]``, mode order (b, c)."""
    if source == "fixed":
        return ROUNDED_XI_SCALED.copy()
    if source == "numeric":
        return driven_couplings(params) * params.x_zpf
    if source == "analytic":
        xb1, xb2, xc1, xc2 = couplings_analytic(params.T_mem, params.n_index, params.m_index, params.L)
        return np.array([[xb1, xb2], [xc1, xc2]]) * params.x_zpf
    raise ValueError(f"unknown coupling source {source!r}; expected one of {COUPLING_SOURCES}")
