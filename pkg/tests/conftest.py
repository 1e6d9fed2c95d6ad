import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from occur.linalg import PAULI_X, PAULI_Z, random_density_matrix, random_hermitian
from occur.model import BathSpectrum, ObservableSpec, SystemSpec

settings.register_profile(
    "occur", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("occur")

# two-level relaxation setup: H_S = sz/2, gamma(1) = 0.2 at T = 0, cutoff 10
OMEGA_C = 10.0
ETA_TWOLEVEL = 0.2 / (2 * math.pi * math.exp(-0.1))
G_TWOLEVEL = PAULI_X + 0.3 * PAULI_Z
EXCITED = np.diag([1.0, 0.0]).astype(complex)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def twolevel_system():
    return SystemSpec(2, 0.5 * PAULI_Z, (G_TWOLEVEL,))


@pytest.fixture
def twolevel_bath():
    return BathSpectrum(temperature=0.0, eta=ETA_TWOLEVEL, omega_c=OMEGA_C)


@pytest.fixture
def twolevel_observable():
    return ObservableSpec("G", G_TWOLEVEL)


def random_state(dim, seed):
    return random_density_matrix(dim, np.random.default_rng(seed))


def random_herm(dim, seed, scale=1.0):
    return random_hermitian(dim, np.random.default_rng(seed), scale)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
