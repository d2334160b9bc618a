import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gibbsnls.spectral import ParameterSet, SpectralField, TorusGrid

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def params():
    return ParameterSet(k=3)


def random_field(grid: TorusGrid, seed: int, band: float | None = None, batch=()):
    """Complex Gaussian coefficients, optionally restricted to |freq| < band."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(batch + (grid.modes,)) + 1j * rng.standard_normal(batch + (grid.modes,))
    if band is not None:
        c = c * (np.abs(grid.freqs) < band)
    return SpectralField(grid, c / np.sqrt(grid.modes))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
