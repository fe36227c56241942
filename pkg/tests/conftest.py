import numpy as np
import pytest

from ghosttomo.projector import project
from ghosttomo.volume import SpherePhantomSpec, build_phantom


@pytest.fixture(scope="session")
def phantom():
    return build_phantom()


@pytest.fixture(scope="session")
def small_phantom():
    return build_phantom(SpherePhantomSpec(n=16, sphere_diameter=3))


@pytest.fixture(scope="session")
def proj0(phantom):
    """0 degree projection of the 64^3 phantom, no axis offset."""
    return project(phantom, 0.0, 0.0).data


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[name].line(name))
