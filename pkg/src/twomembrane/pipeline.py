"""Single-point evaluation: fields and detunings in, steady-state measures out."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import effective_model as em
from .core import SystemParams
from .gaussian_measures import diagnostics, uncertainty_min_eig
from .linear_dynamics import CovarianceState, LinearSystem, StabilityRecord, build_drift, stability, steady_covariance
from .semiclassical import WorkingPoint, solve_inverse


@dataclass
class PointResult:
    wp: WorkingPoint = field(repr=False)
    system: LinearSystem = field(repr=False)
    stability: StabilityRecord = field(repr=False)
    state: CovarianceState | None = field(repr=False)
    E_N: float
    n1: float
    n2: float
    S_m: float
    nu12_over_wm: float
    E_N_gs: float
    E_N_signed: float = math.nan

    @property
    def stable(self) -> bool:
        return self.stability.stable

    @property
    def settling_time(self) -> float:
        return self.stability.settling_time


def evaluate(params: SystemParams, c, xi, log_base: float = math.e, modes=None) -> PointResult:
    """Full pipeline at fields ``c`` (b, c) and the detunings stored in ``params``.

    Unstable points carry ``E_N = 0`` and NaN diagnostics; the stability
    record tells them apart from separable stable points.
    """
    wp = solve_inverse(c, params.Deltas, xi, params, modes=modes)
    system = build_drift(wp, xi, params)
    rec = stability(system.A)
    try:
        eff = em.effective_couplings(wp, xi)
        nu12 = eff.nu12 / params.omega_m
        try:
            egs = em.ground_state_entanglement(eff, params.omega_m, log_base)
        except em.EffectiveModelUnstable:
            egs = math.nan
    except em.PoleError:
        nu12, egs = math.nan, math.nan
    if not rec.stable:
        return PointResult(wp, system, rec, None, 0.0, math.nan, math.nan, math.nan, nu12, egs)
    state = steady_covariance(system)
    d = diagnostics(state.V, log_base)
    return PointResult(wp, system, rec, state, d.E_N, d.n1, d.n2, d.S_m, nu12, egs, d.E_N_signed)


def is_physical(result: PointResult, tol: float = 1e-8) -> bool:
    if result.state is None:
        return True
    return uncertainty_min_eig(result.state.V) >= -tol
