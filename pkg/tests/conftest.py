import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from geosep.frames import frame_pair
from geosep.grid import GridSpec

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(64)


@pytest.fixture(scope="session")
def grid128():
    return GridSpec(128)


@pytest.fixture(scope="session")
def grid256():
    return GridSpec(256)


@pytest.fixture(scope="session")
def pair64(grid64):
    return frame_pair(grid64)


@pytest.fixture(scope="session")
def pair128(grid128):
    return frame_pair(grid128)


@pytest.fixture(scope="session")
def pair256(grid256):
    return frame_pair(grid256)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def in_band_field(grid, rng, top=None):
    """Random real field whose spectrum stays inside |xi| <= 2^(j_max+1)."""
    from geosep.grid import Field, fft2, ifft2

    v = rng.standard_normal((grid.size, grid.size))
    spec = fft2(v)
    top = 2.0 ** (grid.j_max + 1) if top is None else top
    spec[grid.radius > top] = 0.0
    return Field(grid, ifft2(spec).real)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
