"""Parameter grids and drive optimization on top of the single-point pipeline."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .cavity_modes import ROUNDED_XI_SCALED, scaled_couplings
from .core import SystemParams, thermal_occupation, zero_point_length
from .gaussian_measures import uncertainty_min_eig
from .pipeline import PointResult, evaluate

# swept names -> SystemParams fields; c_bn / c_cm are the steady fields
AXES = {
    "c_bn": None, "c_cm": None,
    "Delta_bn": "Delta_bn", "Delta_cm": "Delta_cm",
    "Gamma_bn": "Gamma_bn", "Gamma_cm": "Gamma_cm",
    "mass": "mass", "omega_m": "omega_m", "Q_f": "Q_f", "T_mem": "T_mem",
    "n_bath": "n_bath", "bath_temperature": "bath_temperature",
}

SWEEP_COLUMNS = ("E_N", "stable", "n1", "n2", "S_m", "nu12_over_wm")
UNSTABLE_PENALTY = -1.0
# stable points score at least this, so they always beat the penalty
SIGNED_FLOOR = -0.9
_REFERENCE_X_ZPF = zero_point_length(1e-12, 1e6)


@dataclass
class Model:
    """Everything needed to evaluate one point: device, fields and coupling choice."""

    params: SystemParams
    c: tuple[float, float]
    coupling_source: str = "fixed"
    xi_explicit: np.ndarray | None = None
    log_base: float = math.e
    follow_temperature: bool = False  # recompute n_bath from bath_temperature when omega_m moves

    def couplings(self, params: SystemParams | None = None) -> np.ndarray:
        p = params or self.params
        if self.xi_explicit is not None:
            return np.array(self.xi_explicit, dtype=float)
        if self.coupling_source == "fixed":
            # rounded physical couplings of the default device, rescaled to this membrane's zpf length
            return ROUNDED_XI_SCALED * (p.x_zpf / _REFERENCE_X_ZPF)
        return scaled_couplings(p, self.coupling_source)

    def with_values(self, values: dict) -> "Model":
        changes = {}
        c = list(self.c)
        for name, v in values.items():
            if name not in AXES:
                raise KeyError(name)
            if name == "c_bn":
                c[0] = float(v)
            elif name == "c_cm":
                c[1] = float(v)
            else:
                changes[AXES[name]] = float(v)
        follow = self.follow_temperature or "bath_temperature" in values
        p = self.params.replace(**changes) if changes else self.params
        if follow and p.bath_temperature is not None and ("n_bath" not in values):
            p = p.replace(n_bath=thermal_occupation(p.omega_m, p.bath_temperature))
        return replace(self, params=p, c=(c[0], c[1]), follow_temperature=follow)

    def evaluate(self) -> PointResult:
        return evaluate(self.params, self.c, self.couplings(), self.log_base)


@dataclass
class Axis:
    name: str
    lo: float
    hi: float
    num: int
    scale: str = "lin"

    def __post_init__(self):
        if self.name not in AXES:
            raise ValueError(f"unknown sweep parameter {self.name!r}")
        if self.num < 2:
            raise ValueError("grid sizes must be at least 2")
        if self.scale not in ("lin", "log"):
            raise ValueError("axis scale must be 'lin' or 'log'")
        if self.scale == "log" and not (self.lo > 0 and self.hi > 0):
            raise ValueError("log axes need positive bounds")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.num)
        return np.linspace(self.lo, self.hi, self.num)


@dataclass
class SweepSpec:
    x: Axis
    y: Axis
    model: Model


@dataclass
class SweepRow:
    x: float
    y: float
    E_N: float
    stable: bool
    n1: float
    n2: float
    S_m: float
    nu12_over_wm: float
    physical: bool = True
    error: str = ""


@dataclass
class SweepResult:
    spec: SweepSpec = field(repr=False)
    rows: list[SweepRow]

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def entangled_fraction(self) -> float:
        return float(np.mean(self.column("E_N") > 0))


def _eval_row(args) -> SweepRow:
    model, xname, x, yname, y = args
    try:
        r = model.with_values({xname: x, yname: y}).evaluate()
    except Exception as exc:  # recorded in-row; a sweep never aborts
        return SweepRow(x, y, 0.0, False, math.nan, math.nan, math.nan, math.nan, True, f"{type(exc).__name__}: {exc}")
    physical = True
    if r.state is not None:
        physical = uncertainty_min_eig(r.state.V) >= -1e-8
    return SweepRow(x, y, r.E_N, r.stable, r.n1, r.n2, r.S_m, r.nu12_over_wm, physical)


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Evaluate the grid row-major (x outer, y inner)."""
    jobs = [(spec.model, spec.x.name, float(x), spec.y.name, float(y))
            for x in spec.x.values() for y in spec.y.values()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_eval_row, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        rows = [_eval_row(j) for j in jobs]
    return SweepResult(spec, rows)


# --- optimization -----------------------------------------------------------

class OptimizationFailed(RuntimeError):
    def __init__(self, message, prescan):
        super().__init__(message)
        self.prescan = prescan


@dataclass
class Constraints:
    max_rabi: float | None = None  # cap on |Omega_x|, 1/s
    max_settling: float | None = 0.1  # cap on the settling time, s
    max_phonons: float | None = None  # cap on max(n1, n2)


@dataclass
class OptimumResult:
    values: dict
    E_N: float
    result: PointResult = field(repr=False)
    trace: list = field(repr=False)
    starts: list = field(repr=False)
    prescan: np.ndarray = field(repr=False)


def _objective_value(model: Model, constraints: Constraints) -> tuple[float, PointResult | None]:
    try:
        r = model.evaluate()
    except Exception:
        return UNSTABLE_PENALTY, None
    if not r.stable:
        return UNSTABLE_PENALTY, r
    excess = 0.0
    if constraints.max_rabi is not None:
        excess = max(excess, math.log(max(np.max(np.abs(r.wp.rabi)), 1e-300) / constraints.max_rabi))
    if constraints.max_settling is not None:
        excess = max(excess, math.log(r.settling_time / constraints.max_settling))
    if constraints.max_phonons is not None:
        excess = max(excess, math.log(max(r.n1, r.n2, 1e-300) / constraints.max_phonons))
    if excess > 0:
        # stable but infeasible: between the penalty and every feasible score, sloped toward feasibility
        return UNSTABLE_PENALTY + (SIGNED_FLOOR - UNSTABLE_PENALTY) * 0.9 / (1.0 + excess), r
    # the unclipped value keeps a slope across the separable plateau
    return max(r.E_N_signed, SIGNED_FLOOR), r


def optimize(model: Model, bounds: dict, constraints: Constraints | None = None, starts: int = 8,
             prescan: int = 256, seed: int = 0, maxiter: int = 400, objective=None) -> OptimumResult:
    """Maximize E_N over the named parameters inside a box.

    Positive boxes are searched in log coordinates.  A scrambled Sobol
    pre-scan seeds ``starts`` Nelder-Mead runs from its best points;
    unstable or constraint-violating points score -1.  ``objective`` may
    replace the pipeline with any function of the parameter dict (used for
    sanity checks).
    """
    constraints = constraints or Constraints()
    names = list(bounds)
    lo = np.array([bounds[k][0] for k in names], dtype=float)
    hi = np.array([bounds[k][1] for k in names], dtype=float)
    logs = (lo > 0) & (hi > 0)

    def to_values(u):
        u = np.clip(u, 0.0, 1.0)
        v = np.where(logs, np.exp(np.log(np.where(logs, lo, 1)) + u * (np.log(np.where(logs, hi, 1)) - np.log(np.where(logs, lo, 1)))),
                     lo + u * (hi - lo))
        return {k: float(x) for k, x in zip(names, v)}

    def score(u):
        vals = to_values(u)
        if objective is not None:
            return float(objective(vals))
        return _objective_value(model.with_values(vals), constraints)[0]

    sampler = qmc.Sobol(len(names), scramble=True, seed=seed)
    pts = sampler.random(prescan)
    scan = np.array([score(u) for u in pts])
    order = np.argsort(-scan, kind="stable")
    seeds = [pts[i] for i in order[:starts] if scan[i] > UNSTABLE_PENALTY]
    if not seeds:
        raise OptimizationFailed("no stable point found in the pre-scan", np.column_stack([pts, scan]))

    trace = []
    best_u, best_f = None, -np.inf
    for s in seeds:
        path = []

        def f(u):
            val = score(u)
            path.append(val)
            return -val

        res = minimize(f, s, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(names),
                       options={"maxiter": maxiter, "xatol": 1e-6, "fatol": 1e-9, "initial_simplex": _simplex(s)})
        trace.append(path)
        if -res.fun > best_f:
            best_f, best_u = -res.fun, res.x

    values = to_values(best_u)
    if objective is not None:
        return OptimumResult(values, float(objective(values)), None, trace, seeds, np.column_stack([pts, scan]))
    final, result = _objective_value(model.with_values(values), constraints)
    # re-evaluation must reproduce the optimizer's value
    if abs(final - best_f) > 1e-9:
        raise RuntimeError(f"optimum does not reproduce: {final} vs {best_f}")
    if result is None or final < SIGNED_FLOOR:
        raise OptimizationFailed("every start ended at an unstable or constrained-out point", np.column_stack([pts, scan]))
    return OptimumResult(values, result.E_N, result, trace, seeds, np.column_stack([pts, scan]))


def _simplex(u0, step=0.05):
    n = len(u0)
    simplex = [np.array(u0, dtype=float)]
    for i in range(n):
        v = np.array(u0, dtype=float)
        v[i] = v[i] + step if v[i] + step <= 1 else v[i] - step
        simplex.append(v)
    return np.array(simplex)
