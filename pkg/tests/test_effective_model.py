import math

import numpy as np
import pytest

from conftest import PAPER_XI
from twomembrane.core import SystemParams
from twomembrane.effective_model import (EffectiveCouplings, EffectiveModelUnstable, PoleError,
                                         effective_couplings, ground_state_covariance, ground_state_entanglement,
                                         normal_frequencies, stiffness)
from twomembrane.gaussian_measures import symplectic_eigenvalues
from twomembrane.linear_dynamics import build_drift
from twomembrane.semiclassical import solve_inverse


def couplings(nu1, nu2, nu12):
    return EffectiveCouplings(nu1, nu2, nu12, np.zeros((2, 2)))


def test_symmetric_case_value():
    # nu12 = omega_m, nu1 = nu2 = 0: normal stiffnesses 3/2 and 1/2
    e = ground_state_entanglement(couplings(0.0, 0.0, 1e6), 1e6)
    assert e == pytest.approx(0.5 * math.log(math.sqrt(3)), abs=1e-10)


def test_ground_state_is_pure_and_uncoupled_limit_is_vacuum():
    V = ground_state_covariance(couplings(2e5, -1e5, 4e5), 1e6)
    np.testing.assert_allclose(symplectic_eigenvalues(V), [1.0, 1.0], rtol=1e-12)
    np.testing.assert_allclose(ground_state_covariance(couplings(0, 0, 0), 1e6), np.eye(4), atol=1e-15)


def test_unstable_stiffness_raises():
    with pytest.raises(EffectiveModelUnstable):
        ground_state_covariance(couplings(0.0, 0.0, 2.5e6), 1e6)
    with pytest.raises(EffectiveModelUnstable):
        normal_frequencies(couplings(-2e6, 0.0, 0.0), 1e6)


def test_pole_at_zero_detuning():
    p = SystemParams(Delta_bn=0.0, Delta_cm=2e7)
    wp = solve_inverse([0.0, 300], p.Deltas, np.zeros((2, 2)), p)
    with pytest.raises(PoleError):
        effective_couplings(wp, PAPER_XI)


def test_coupling_formulas():
    p = SystemParams(Delta_bn=4e6, Delta_cm=2e7)
    wp = solve_inverse([60, 386.4], p.Deltas, PAPER_XI, p)
    eff = effective_couplings(wp, PAPER_XI)
    n = np.abs(wp.c) ** 2
    assert eff.nu12 == pytest.approx(-4 * np.sum(PAPER_XI[:, 0] * PAPER_XI[:, 1] * n / wp.mu), rel=1e-14)
    K = stiffness(eff, p.omega_m)
    assert K[0, 1] == K[1, 0] == eff.nu12 / 2
    assert eff.ratios.shape == (2, 2)


def test_normal_frequencies_match_full_drift_in_dispersive_limit():
    # far-detuned weak drive: optical modes follow adiabatically
    p = SystemParams(Delta_bn=3e8, Delta_cm=5e8, Gamma_bn=1e5, Gamma_cm=1e5)
    wp = solve_inverse([400, 600], p.Deltas, PAPER_XI, p)
    eff = effective_couplings(wp, PAPER_XI)
    assert eff.valid
    w_eff = np.sort(normal_frequencies(eff, p.omega_m))
    ev = np.linalg.eigvals(build_drift(wp, PAPER_XI, p).A)
    mech = np.sort(np.abs(ev.imag[np.abs(ev.imag) < 5 * p.omega_m]))[::2]
    np.testing.assert_allclose(mech, w_eff, rtol=1e-3)
