"""Physical parameters, unit conventions and drive bookkeeping.

All quoted frequencies are angular rates in 1/s; no factor of 2*pi is ever
inserted.  Membrane coordinates are dimensionless, measured in units of
``x_zpf = sqrt(hbar / (m * omega_m))``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K
C_LIGHT = 2.99792458e8  # m / s

# "much smaller than" is read as a ratio below this value unless overridden
DEFAULT_VALIDITY_RATIO = 0.1


class DomainError(ValueError):
    """An input lies outside the physical domain of a formula."""


def thermal_occupation(omega_m: float, temperature: float) -> float:
    """Bose-Einstein phonon number ``1 / (exp(hbar w / kB T) - 1)``."""
    if omega_m <= 0 or temperature <= 0:
        raise DomainError("thermal_occupation needs omega_m > 0 and temperature > 0")
    return 1.0 / math.expm1(HBAR * omega_m / (K_B * temperature))


def temperature_for_occupation(omega_m: float, n_bath: float) -> float:
    """Inverse of :func:`thermal_occupation`."""
    if omega_m <= 0 or n_bath <= 0:
        raise DomainError("temperature_for_occupation needs omega_m > 0 and n_bath > 0")
    return HBAR * omega_m / (K_B * math.log1p(1.0 / n_bath))


def zero_point_length(mass: float, omega_m: float) -> float:
    """Position unit ``sqrt(hbar / (m omega_m))`` in metres."""
    if mass <= 0 or omega_m <= 0:
        raise DomainError("zero_point_length needs mass > 0 and omega_m > 0")
    return math.sqrt(HBAR / (mass * omega_m))


def rabi_from_field(c: complex, mu: float, gamma: float) -> complex:
    """Drive amplitude that sustains the intracavity field ``c``.

    Inverts ``Omega* / 2 = -(mu - i Gamma / 2) c``.
    """
    return complex(np.conj(-2.0 * (mu - 0.5j * gamma) * c))


def field_from_rabi(omega: complex, mu: float, gamma: float) -> complex:
    """Steady intracavity field for a given drive and effective detuning."""
    return complex(-np.conj(omega) / (2.0 * (mu - 0.5j * gamma)))


def laser_power(omega: complex, omega_laser: float, gamma: float) -> float:
    """Input power ``hbar w_L |Omega|^2 / (4 Gamma)`` in watts."""
    if gamma <= 0:
        raise DomainError("laser_power needs a positive decay rate")
    return HBAR * omega_laser * abs(omega) ** 2 / (4.0 * gamma)


@dataclass(frozen=True)
class SystemParams:
    """Device and drive parameters in SI units.

    ``n_bath`` is the primary thermal input.  ``bath_temperature`` is kept
    only as the convenience it was derived from (or ``None``).
    """

    L: float = 1e-3
    T_mem: float = 0.2
    mass: float = 1e-12
    omega_m: float = 1e6
    Q_f: float = 1e7
    Gamma_bn: float = 1e5
    Gamma_cm: float = 1e5
    n_index: int = 2000
    m_index: int = 6000
    n_bath: float = 1000.0
    Delta_bn: float = 0.0
    Delta_cm: float = 0.0
    q01: float | None = None
    q02: float | None = None
    bath_temperature: float | None = None

    def __post_init__(self):
        if self.q01 is None:
            object.__setattr__(self, "q01", -self.L)
        if self.q02 is None:
            object.__setattr__(self, "q02", 2.0 * self.L)
        problems = []
        if not self.L > 0:
            problems.append("L must be positive")
        if not 0 < self.T_mem < 1:
            problems.append("T_mem must lie in (0, 1)")
        if not self.mass > 0:
            problems.append("mass must be positive")
        if not self.omega_m > 0:
            problems.append("omega_m must be positive")
        if not self.Q_f > 0:
            problems.append("Q_f must be positive")
        if not (self.Gamma_bn > 0 and self.Gamma_cm > 0):
            problems.append("cavity decay rates must be positive")
        if not self.n_bath >= 0:
            problems.append("n_bath must be non-negative")
        if self.n_index < 1 or self.m_index < 1:
            problems.append("mode indices must be positive integers")
        if problems:
            raise DomainError("; ".join(problems))

    @classmethod
    def from_temperature(cls, temperature: float, **kw) -> "SystemParams":
        omega_m = kw.get("omega_m", cls.omega_m)
        n = thermal_occupation(omega_m, temperature)
        return cls(n_bath=n, bath_temperature=temperature, **kw)

    @property
    def gamma(self) -> float:
        """Mechanical damping rate ``omega_m / Q_f``."""
        return self.omega_m / self.Q_f

    @property
    def x_zpf(self) -> float:
        return zero_point_length(self.mass, self.omega_m)

    @property
    def Gammas(self) -> np.ndarray:
        return np.array([self.Gamma_bn, self.Gamma_cm])

    @property
    def Deltas(self) -> np.ndarray:
        return np.array([self.Delta_bn, self.Delta_cm])

    def replace(self, **changes) -> "SystemParams":
        # moving the cavity rescales default rest positions with it
        if "L" in changes and "q01" not in changes and self.q01 == -self.L:
            changes["q01"] = -changes["L"]
        if "L" in changes and "q02" not in changes and self.q02 == 2.0 * self.L:
            changes["q02"] = 2.0 * changes["L"]
        return dataclasses.replace(self, **changes)


@dataclass
class ValidityCheck:
    name: str
    ratio: float
    threshold: float

    @property
    def ok(self) -> bool:
        return bool(self.ratio < self.threshold)


@dataclass
class ValidityReport:
    checks: list[ValidityCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def __getitem__(self, name: str) -> ValidityCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {c.name: {"ratio": c.ratio, "threshold": c.threshold, "ok": c.ok} for c in self.checks}


def validate(params: SystemParams, modes, rabi=(), threshold: float = DEFAULT_VALIDITY_RATIO) -> ValidityReport:
    """Check the slow-membrane and single-mode-drive assumptions.

    ``modes`` maps branch labels ("a", "b", "c", ...) to resonance angular
    frequencies; ``rabi`` holds the drive amplitudes of the b and c modes.
    Each check reports ``ratio < threshold``.
    """
    freqs = {k: float(v) for k, v in dict(modes).items()}
    report = ValidityReport()
    labels = [k for k in ("a", "b", "c") if k in freqs]
    gaps = [abs(freqs[x] - freqs[y]) for i, x in enumerate(labels) for y in labels[i + 1:]]
    if gaps:
        report.checks.append(ValidityCheck("adiabatic_membranes", params.omega_m / min(gaps), threshold))
    if "b" in freqs and "c" in freqs:
        sep = abs(freqs["b"] - freqs["c"])
        peak = max((abs(r) for r in rabi), default=0.0)
        report.checks.append(ValidityCheck("single_mode_drive", peak / sep, threshold))
    return report
