import math

import numpy as np
import pytest

from twomembrane.cavity_modes import ROUNDED_XI_SCALED
from twomembrane.core import SystemParams

# rounded scaled couplings of the default device, 1/s
PAPER_XI = ROUNDED_XI_SCALED.copy()

# quoted single-point anchor (n_bath = 1000)
ANCHOR_C = (60.0, 386.4)
ANCHOR_DELTA = (4.2e6, 2.09e7)

# stable neighbour of the anchor, on the edge-optimized detunings
EDGE_DELTA = (4.2171836e6, 2.116220149e7)

# collected by test_acceptance and printed at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture
def default_params():
    return SystemParams()


@pytest.fixture
def anchor_params():
    return SystemParams(n_bath=1000.0, Delta_bn=ANCHOR_DELTA[0], Delta_cm=ANCHOR_DELTA[1])


@pytest.fixture
def edge_params():
    return SystemParams(n_bath=1000.0, Delta_bn=EDGE_DELTA[0], Delta_cm=EDGE_DELTA[1])


def random_symplectic(rng, n_modes):
    """Product of a random orthogonal symplectic, squeezers and another orthogonal symplectic."""
    def orth():
        H = rng.standard_normal((n_modes, n_modes)) + 1j * rng.standard_normal((n_modes, n_modes))
        U, _ = np.linalg.qr(H)
        # (a -> U a) in (q1, p1, q2, p2, ...) ordering
        S = np.zeros((2 * n_modes, 2 * n_modes))
        S[0::2, 0::2] = U.real
        S[0::2, 1::2] = -U.imag
        S[1::2, 0::2] = U.imag
        S[1::2, 1::2] = U.real
        return S
    r = rng.uniform(-0.8, 0.8, n_modes)
    Z = np.diag(np.ravel(np.column_stack([np.exp(-r), np.exp(r)])))
    return orth() @ Z @ orth()


def random_gaussian_state(rng, n_modes, nu_max=5.0):
    nus = rng.uniform(1.0, nu_max, n_modes)
    S = random_symplectic(rng, n_modes)
    return S @ np.diag(np.repeat(nus, 2)) @ S.T, nus


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def natural_to_bits(x):
    return x / math.log(2)
