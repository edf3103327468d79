import numpy as np
import pytest

from rbdf.spectral import DomainSpec
from rbdf.solver import PhysicalParams, StepperConfig, random_state, simulate


@pytest.fixture(scope="session")
def small_domain():
    return DomainSpec(L=2 * np.pi, l=np.pi, Nx=32, Ny=64)


@pytest.fixture(scope="session")
def desk_domain():
    """The acceptance-scale grid."""
    return DomainSpec(L=2 * np.pi, l=np.pi, Nx=64, Ny=128)


@pytest.fixture(scope="session")
def desk_params(desk_domain):
    return PhysicalParams(nu=1.0, kappa=1.0, g=100.0, domain=desk_domain)


@pytest.fixture(scope="session")
def attractor_state(desk_params):
    """A state on (near) the attractor at the acceptance parameters.

    Shared by the synchronization / lifting-map acceptance tests; the
    burn-in dominates their cost, so it runs once per session.
    """
    s0 = random_state(desk_params, seed=11, amplitude_u=1.0)
    res = simulate(
        s0, desk_params, StepperConfig(dt=2e-3), t_end=15.0,
        sample_every=10**9, diag_every=2000,
    )
    return res.snapshots[-1]


def pytest_addoption(parser):
    parser.addoption(
        "--skip-slow", action="store_true", default=False,
        help="skip the multi-minute acceptance criteria",
    )


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--skip-slow"):
        return
    marker = pytest.mark.skip(reason="--skip-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(marker)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute acceptance runs")
