import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sptmbqc.algebra import spin1_bundle
from sptmbqc.states import HamiltonianParams, aklt_prime_mps, build_aklt_prime, build_hamiltonian, ground_state

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def aklt4():
    return build_aklt_prime(4)


@pytest.fixture(scope="session")
def aklt6():
    return build_aklt_prime(6)


@pytest.fixture(scope="session")
def aklt8():
    return build_aklt_prime(8)


@pytest.fixture(scope="session")
def aklt10_mps():
    return aklt_prime_mps(10)


@pytest.fixture(scope="session")
def haldane6():
    """Ground state away from the AKLT point, still inside the Haldane phase."""
    return ground_state(build_hamiltonian(HamiltonianParams(6, theta=0.15))).state


@pytest.fixture(scope="session")
def bundle4():
    return spin1_bundle(4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
