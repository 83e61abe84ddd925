import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twomembrane.core import (HBAR, K_B, DomainError, SystemParams, field_from_rabi, laser_power, rabi_from_field,
                              temperature_for_occupation, thermal_occupation, validate, zero_point_length)


def test_thermal_occupation_matches_direct_formula():
    # oracle: Bose-Einstein with CODATA constants written out
    x = 1.054571817e-34 * 1e6 / (1.380649e-23 * 0.1)
    assert thermal_occupation(1e6, 0.1) == pytest.approx(1.0 / (math.exp(x) - 1.0), rel=1e-12)
    # frozen value
    assert thermal_occupation(1e6, 0.1) == pytest.approx(13091.5339, rel=1e-8)


def test_thermal_occupation_high_temperature_limit():
    T = 50.0
    assert thermal_occupation(1e6, T) == pytest.approx(K_B * T / (HBAR * 1e6) - 0.5, rel=1e-9)


@given(st.floats(1e3, 1e9), st.floats(1e-3, 10.0))
def test_temperature_roundtrip(omega, T):
    n = thermal_occupation(omega, T)
    if n > 1e-300:
        assert temperature_for_occupation(omega, n) == pytest.approx(T, rel=1e-9)


@pytest.mark.parametrize("args", [(0.0, 0.1), (1e6, 0.0), (-1.0, 1.0)])
def test_thermal_occupation_domain(args):
    with pytest.raises(DomainError):
        thermal_occupation(*args)


def test_zero_point_length():
    assert zero_point_length(1e-12, 1e6) == pytest.approx(math.sqrt(HBAR / 1e-6), rel=1e-14)
    with pytest.raises(DomainError):
        zero_point_length(0.0, 1e6)


@given(st.complex_numbers(max_magnitude=1e4, allow_nan=False, allow_infinity=False),
       st.floats(-1e8, 1e8), st.floats(1e3, 1e7))
def test_rabi_field_roundtrip(c, mu, gamma):
    omega = rabi_from_field(c, mu, gamma)
    assert field_from_rabi(omega, mu, gamma) == pytest.approx(c, rel=1e-12, abs=1e-12)


def test_rabi_satisfies_steady_field_equation():
    c, mu, g = 60 + 20j, 4.1e6, 1e5
    omega = rabi_from_field(c, mu, g)
    # 0 = -(G/2 + i mu) c - i Omega*/2
    assert abs(-(g / 2 + 1j * mu) * c - 0.5j * np.conj(omega)) < 1e-6 * abs(omega)


def test_laser_power():
    assert laser_power(2e9, 1.8e15, 1e5) == pytest.approx(HBAR * 1.8e15 * 4e18 / 4e5, rel=1e-14)
    with pytest.raises(DomainError):
        laser_power(1.0, 1.0, 0.0)


def test_params_defaults_and_derived():
    p = SystemParams()
    assert (p.q01, p.q02) == (-1e-3, 2e-3)
    assert p.gamma == pytest.approx(0.1)
    assert np.allclose(p.Gammas, [1e5, 1e5])


@pytest.mark.parametrize("kw", [{"T_mem": 1.0}, {"T_mem": 0.0}, {"mass": -1.0}, {"omega_m": 0.0}, {"Q_f": 0.0},
                                {"Gamma_bn": 0.0}, {"n_bath": -1.0}, {"L": 0.0}, {"n_index": 0}])
def test_params_reject_unphysical(kw):
    with pytest.raises(DomainError):
        SystemParams(**kw)


def test_replace_moves_default_rest_positions_with_length():
    p = SystemParams().replace(L=2e-3)
    assert (p.q01, p.q02) == (-2e-3, 4e-3)
    q = SystemParams(q01=-0.5e-3).replace(L=2e-3)
    assert q.q01 == -0.5e-3


def test_from_temperature_records_both():
    p = SystemParams.from_temperature(0.1)
    assert p.bath_temperature == 0.1
    assert p.n_bath == pytest.approx(thermal_occupation(1e6, 0.1))


def test_validity_report():
    p = SystemParams()
    rep = validate(p, {"a": 1.0e15, "b": 1.0e15 + 1e11, "c": 1.0e15 - 1e11}, rabi=[1e9, 2e10])
    assert rep["adiabatic_membranes"].ratio == pytest.approx(1e6 / 1e11)
    assert rep["single_mode_drive"].ratio == pytest.approx(2e10 / 2e11)
    assert not rep["single_mode_drive"].ok
    assert rep["adiabatic_membranes"].ok
    loose = validate(p, {"b": 0.0, "c": 2e11}, rabi=[2e10], threshold=0.2)
    assert loose.ok
