import numpy as np
import pytest
from hypothesis import settings

from ogsnet.cloudgrid import GridSpec, basin_omega_field, synth_generate

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_series():
    spec = GridSpec.from_pixel_size(40, 50, -40.0, 115.0, 0.5)
    field = basin_omega_field(spec, [(10, 12), (30, 38)], [0.35, 0.3], [6, 5], 0.6)
    return synth_generate(spec, 600, 5.0, field, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
