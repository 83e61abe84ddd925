"""Weak-probe homodyne readout of the membrane positions.

Each probe is an extra optical mode coupled to both membranes with weights
``xi_y = (xi_y1, xi_y2)``.  Its homodyne output is a noisy, filtered copy of
``xi_y . q(t)``.  Trajectories of the full linear system (membranes, driven
modes, probes) are sampled with an exact Gaussian discretization in which
the time-integrated homodyne current is carried as extra state and reset
every step, so that each sample is the current averaged over one step.

The mechanical covariance is recovered from cross-spectra of the two
records.  Because ``dq_j/dt = omega_m p_j`` exactly, the momentum block and
the q-p cross terms follow from frequency-weighted integrals of the same
position spectra.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.signal import csd

from .cavity_modes import CavityGeometry, couplings_numeric, find_mode
from .core import SystemParams
from .gaussian_measures import log_negativity
from .linear_dynamics import LinearSystem, assemble_diffusion, assemble_drift, stability, state_labels
from .propagate import get_kernel
from .semiclassical import WorkingPoint

RWA_RATIO = 0.1
DEGENERATE_WEIGHTS = 1e-3
CHUNK = 1 << 15


class DegenerateProbeError(ValueError):
    pass


class SimulationRefused(RuntimeError):
    pass


@dataclass
class ProbeConfig:
    branch: str
    index: int
    weights: np.ndarray  # scaled couplings (xi_y1, xi_y2), 1/s
    c: complex = 1.0
    mu: float = 0.0
    Gamma: float = 2e6
    phase: float = math.pi / 2  # homodyne angle; pi/2 reads the Y quadrature

    def rwa_ratio(self, omega_m: float) -> float:
        return float(np.max(np.abs(self.weights * self.c)) / omega_m)


@dataclass
class HomodyneRecord:
    times: np.ndarray
    samples: np.ndarray
    seed: int
    dt: float
    duration: float
    method: str
    probe: ProbeConfig = field(repr=False)


@dataclass
class Simulation:
    records: list[HomodyneRecord]
    states: np.ndarray = field(repr=False)  # decimated full states after burn-in
    stride: int
    system: LinearSystem = field(repr=False)


def probe_weights(params: SystemParams, branch: str, index: int) -> np.ndarray:
    """Scaled couplings of a probe resonance at the rest geometry."""
    if (branch in ("a", "b", "bp") and index == params.n_index) or (branch == "c" and index == params.m_index):
        raise ValueError(f"probe {branch}{index} coincides with a driven resonance")
    geom = CavityGeometry.at_rest(params)
    n_ref = max(int(round(index / 3)), 1) if branch == "c" else None
    mode = couplings_numeric(geom, find_mode(geom, branch, index, n_ref=n_ref), params.x_zpf)
    return np.array(mode.xi_scaled)


def weight_matrix(probes) -> np.ndarray:
    return np.array([p.weights for p in probes], dtype=float)


def weight_conditioning(W) -> float:
    """Ratio of smallest to largest singular value of the probe weight matrix."""
    s = np.linalg.svd(np.asarray(W, dtype=float), compute_uv=False)
    return float(s[-1] / s[0])


def check_weights(W):
    r = weight_conditioning(W)
    if r < DEGENERATE_WEIGHTS:
        raise DegenerateProbeError(f"probes measure nearly the same combination (singular ratio {r:.3g})")
    return r


def make_probe(params: SystemParams, branch: str, index: int, rwa_fraction: float, Gamma: float = 2e6,
               mu: float = 0.0, phase: float = math.pi / 2) -> ProbeConfig:
    """Probe whose largest ``|xi_yj c_y|`` equals ``rwa_fraction * omega_m``."""
    w = probe_weights(params, branch, index)
    c = rwa_fraction * params.omega_m / np.max(np.abs(w))
    return ProbeConfig(branch, index, w, complex(c), mu, Gamma, phase)


def extended_system(wp: WorkingPoint, xi, params: SystemParams, probes) -> LinearSystem:
    """Drift and diffusion with the probe modes appended after the driven ones.

    The probes' own static radiation-pressure shift of the membranes is
    neglected; it is second order in the probe field.
    """
    c = list(wp.c) + [p.c for p in probes]
    mu = list(wp.mu) + [p.mu for p in probes]
    gam = list(params.Gammas) + [p.Gamma for p in probes]
    allxi = np.vstack([np.asarray(xi, dtype=float)] + [p.weights for p in probes])
    A = assemble_drift(params.omega_m, params.gamma, c, mu, gam, allxi)
    D = assemble_diffusion(params.gamma, params.n_bath, gam)
    return LinearSystem(A, D, state_labels(len(c)))


def output_matrices(system: LinearSystem, probes):
    """Homodyne readout ``dZ = C x dt - E dW`` for each probe, with ``dx = A x dt + B dW``."""
    n = system.A.shape[0]
    first = n - 2 * len(probes)
    C = np.zeros((len(probes), n))
    E = np.zeros((len(probes), n))
    for i, p in enumerate(probes):
        X, Y = first + 2 * i, first + 2 * i + 1
        C[i, X] = math.sqrt(p.Gamma) * math.cos(p.phase)
        C[i, Y] = math.sqrt(p.Gamma) * math.sin(p.phase)
        E[i, X] = math.cos(p.phase)
        E[i, Y] = math.sin(p.phase)
    return C, E


def discretize(system: LinearSystem, C, E, dt: float, method: str = "exact"):
    """Transition matrix (n + r, n) and noise covariance (n + r, n + r) for one step."""
    A, D = system.A, system.D
    n = A.shape[0]
    r = C.shape[0]
    B = np.diag(np.sqrt(np.diag(D)))
    Bt = np.vstack([B, -E])
    if method == "euler":
        Phi = np.vstack([np.eye(n) + A * dt, C * dt])
        return Phi, Bt @ Bt.T * dt
    if method != "exact":
        raise ValueError(f"unknown method {method!r}")
    At = np.zeros((n + r, n + r))
    At[:n, :n] = A
    At[n:, :n] = C
    m = n + r
    M = np.zeros((2 * m, 2 * m))
    M[:m, :m] = -At
    M[:m, m:] = Bt @ Bt.T
    M[m:, m:] = At.T
    F = expm(M * dt)
    Phi_full = F[m:, m:].T
    Q = Phi_full @ F[:m, m:]
    Q = 0.5 * (Q + Q.T)
    return Phi_full[:, :n], Q


def _noise_factor(Q):
    lam, U = np.linalg.eigh(Q)
    return U * np.sqrt(np.clip(lam, 0.0, None))


def simulate_trajectories(wp: WorkingPoint, xi, params: SystemParams, probes, duration: float, dt: float,
                          seed: int, method: str = "exact", burn_in_settling: float = 5.0, stride: int = 0,
                          backend: str | None = None, system: LinearSystem | None = None) -> Simulation:
    """Sample homodyne records of all probes over ``duration`` seconds.

    The run starts at the fixed point, discards ``burn_in_settling`` settling
    times of the extended system, then records.  Noise comes from a PCG64
    stream seeded with ``seed`` in fixed-size chunks, so records are
    reproducible bit for bit for fixed (seed, dt, duration, config, backend).
    """
    system = system if system is not None else extended_system(wp, xi, params, probes)
    rec = stability(system.A)
    if not rec.stable:
        raise SimulationRefused(f"extended system unstable (max Re lambda = {rec.spectral_abscissa:.4g})")
    fastest = max(np.max(np.abs(rec.eigenvalues)), max((abs(p.mu) for p in probes), default=0.0))
    if method == "euler" and dt >= 0.01 / fastest:
        raise SimulationRefused(f"Euler step {dt:.3g} s exceeds 0.01/{fastest:.3g}")
    if method == "euler" and np.max(np.abs(np.linalg.eigvals(np.eye(len(system.A)) + system.A * dt))) >= 1.0:
        # lightly damped fast modes need dt < 2 |Re lambda| / |lambda|^2
        raise SimulationRefused(f"Euler step {dt:.3g} s makes the discrete recursion unstable")
    if method == "exact" and dt > 0.1 / params.omega_m:
        raise SimulationRefused("step too coarse to resolve the mechanical band (need dt <= 0.1/omega_m)")

    C, E = output_matrices(system, probes)
    Phi, Q = discretize(system, C, E, dt, method)
    L = _noise_factor(Q)
    kernel = get_kernel(backend)
    rng = np.random.Generator(np.random.PCG64(seed))
    n = system.A.shape[0]

    burn = int(math.ceil(burn_in_settling * rec.settling_time / dt))
    steps = int(round(duration / dt))
    x = np.zeros(n)
    for start in range(0, burn, CHUNK):
        k = min(CHUNK, burn - start)
        w = rng.standard_normal((k, n + len(probes))) @ L.T
        _, _, x = kernel(Phi, x, w, 0)

    zs, sts = [], []
    for start in range(0, steps, CHUNK):
        k = min(CHUNK, steps - start)
        if stride > 0 and start % stride:
            raise ValueError("stride must divide the chunk size")
        w = rng.standard_normal((k, n + len(probes))) @ L.T
        z, s, x = kernel(Phi, x, w, stride)
        zs.append(z)
        sts.append(s)
    z = np.concatenate(zs) if zs else np.empty((0, len(probes)))
    states = np.concatenate(sts) if sts else np.empty((0, n))
    times = np.arange(steps) * dt
    records = [HomodyneRecord(times, z[:, i] / dt, seed, dt, duration, method, p) for i, p in enumerate(probes)]
    return Simulation(records, states, stride, system)


def transfer(probe: ProbeConfig, omega, dt: float | None = None):
    """Response of the sampled record to ``xi_y . q`` at angular frequency ``omega``.

    Uses the ``d/dt -> i omega`` convention of numpy/scipy spectra and
    includes the one-step averaging of the samples when ``dt`` is given.
    """
    omega = np.asarray(omega, dtype=float)
    g = probe.Gamma
    Ap = np.array([[-g / 2, probe.mu], [-probe.mu, -g / 2]])
    c = complex(probe.c)
    Bs = math.sqrt(2) * np.array([c.imag, -c.real])
    Cr = math.sqrt(g) * np.array([math.cos(probe.phase), math.sin(probe.phase)])
    out = np.empty(omega.shape, dtype=complex)
    for i, w in np.ndenumerate(omega):
        out[i] = Cr @ np.linalg.solve(1j * w * np.eye(2) - Ap, Bs)
    if dt is not None:
        x = omega * dt
        with np.errstate(invalid="ignore", divide="ignore"):
            box = np.where(x == 0, 1.0, (np.exp(1j * x) - 1) / (1j * np.where(x == 0, 1.0, x)))
        out = out * box
    return out


@dataclass
class Reconstruction:
    V4: np.ndarray  # estimated mechanical covariance, (q1, p1, q2, p2) order
    se: np.ndarray  # batch-means standard errors, same shape
    E_N: float
    E_N_se: float
    blocks: int

    @property
    def q_block(self) -> np.ndarray:
        return self.V4[np.ix_([0, 2], [0, 2])]

    @property
    def q_block_se(self) -> np.ndarray:
        return self.se[np.ix_([0, 2], [0, 2])]


def _spectral_moments(ya, yb, fs, nperseg, window, H, floor, W, omega_m, band):
    """Mechanical 4x4 covariance from one stretch of the two records."""
    f, Saa = csd(ya, ya, fs=fs, nperseg=nperseg, window=window, return_onesided=False, detrend=False)
    _, Sbb = csd(yb, yb, fs=fs, nperseg=nperseg, window=window, return_onesided=False, detrend=False)
    _, Sab = csd(ya, yb, fs=fs, nperseg=nperseg, window=window, return_onesided=False, detrend=False)
    om = 2 * np.pi * f
    Ha, Hb = H(om)
    if floor is not None:
        Saa = Saa - floor[0](om)
        Sbb = Sbb - floor[1](om)
    Mab = np.stack([np.stack([Saa / np.abs(Ha) ** 2, Sab / (np.conj(Ha) * Hb)]),
                    np.stack([np.conj(Sab) / (np.conj(Hb) * Ha), Sbb / np.abs(Hb) ** 2])])
    Winv = np.linalg.inv(W)
    S = np.einsum("ik,klf,jl->ijf", Winv, Mab, Winv)
    sel = np.abs(om) <= band if band is not None else np.ones_like(om, dtype=bool)
    df = f[1] - f[0] if len(f) > 1 else fs
    Vq = np.real(S[:, :, sel].sum(axis=-1)) * df
    Vp = np.real((S[:, :, sel] * (om[sel] / omega_m) ** 2).sum(axis=-1)) * df
    # <q_i p_j> = -(1/omega_m) int omega Im S_ij df under the csd convention conj(X) Y
    Vqp = -(np.imag(S[:, :, sel]) * om[sel]).sum(axis=-1) * df / omega_m
    V4 = np.zeros((4, 4))
    qi, pi = [0, 2], [1, 3]
    V4[np.ix_(qi, qi)] = 0.5 * (Vq + Vq.T)
    V4[np.ix_(pi, pi)] = 0.5 * (Vp + Vp.T)
    # stationarity makes <q_i p_i> vanish and <q_1 p_2> = -<q_2 p_1>
    a = 0.5 * (Vqp[0, 1] - Vqp[1, 0])
    V4[0, 3] = V4[3, 0] = a
    V4[2, 1] = V4[1, 2] = -a
    # the simulation covariance equals <{x, x}>, so no extra factor is needed
    return V4


def reconstruct_covariance(records, weights, omega_m: float, nperseg: int | None = None, window="hann",
                           calibration=None, band: float | None = None, blocks: int = 20,
                           use_transfer: bool = True, log_base: float = math.e) -> Reconstruction:
    """Estimate the mechanical covariance from two homodyne records.

    ``weights`` is the 2x2 probe weight matrix.  ``calibration`` holds the
    two records of a run with the probe couplings switched off; its
    auto-spectra are subtracted as the measurement noise floor.  Cross
    spectra are deconvolved by the probe transfer functions, mapped through
    the inverse weight matrix and integrated over ``|omega| <= band``.
    Standard errors come from ``blocks`` contiguous batches.
    """
    W = np.asarray(weights, dtype=float)
    check_weights(W)
    ya, yb = records[0].samples, records[1].samples
    dt = records[0].dt
    fs = 1.0 / dt
    N = len(ya)
    probes = (records[0].probe, records[1].probe)

    if use_transfer:
        def H(om):
            return transfer(probes[0], om, dt), transfer(probes[1], om, dt)
    else:
        def H(om):
            return np.ones_like(om, dtype=complex), np.ones_like(om, dtype=complex)

    def floor_for(seg):
        if calibration is None:
            return None
        out = []
        for rec in calibration:
            fc, Scc = csd(rec.samples, rec.samples, fs=fs, nperseg=seg, window=window,
                          return_onesided=False, detrend=False)
            out.append(lambda om, fc=fc, Scc=Scc: np.interp(om, 2 * np.pi * np.fft.fftshift(fc),
                                                            np.real(np.fft.fftshift(Scc))))
        return out

    def estimate(a, b, seg):
        return _spectral_moments(a, b, fs, seg, window, H, floor_for(seg), W, omega_m, band)

    seg_full = nperseg or N
    V4 = estimate(ya, yb, min(seg_full, N))
    if blocks >= 2:
        size = N // blocks
        seg = min(seg_full, size)
        parts = np.array([estimate(ya[i * size:(i + 1) * size], yb[i * size:(i + 1) * size], seg)
                          for i in range(blocks)])
        se = parts.std(axis=0, ddof=1) / math.sqrt(blocks)
        # delete-one-block jackknife for the entanglement estimate
        en = []
        for i in range(blocks):
            Vi = (parts.sum(axis=0) - parts[i]) / (blocks - 1)
            en.append(_safe_en(Vi, log_base))
        en = np.array(en)
        en_se = math.sqrt((blocks - 1) / blocks * np.sum((en - en.mean()) ** 2))
    else:
        se = np.full((4, 4), np.nan)
        en_se = math.nan
    for j in (0, 1, 2, 3):
        if V4[j, j] < 0:
            warnings.warn("noise-subtracted variance negative; clamped to 0", RuntimeWarning, stacklevel=2)
            V4[j, j] = 0.0
    return Reconstruction(V4, se, _safe_en(V4, log_base), en_se, blocks)


def _safe_en(V4, base):
    try:
        return log_negativity(V4, base)
    except (ValueError, ArithmeticError):
        return math.nan


def zero_probe_couplings(probes):
    """Copies of the probes with their membrane couplings switched off (calibration run)."""
    return [ProbeConfig(p.branch, p.index, np.zeros(2), p.c, p.mu, p.Gamma, p.phase) for p in probes]
