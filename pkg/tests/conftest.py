import pytest
from hypothesis import HealthCheck, settings

from fhsim import SimConfig

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def baseline_config():
    return SimConfig()


@pytest.fixture
def small_config():
    """One site, short run: fast enough for engine-level unit tests."""
    return SimConfig(n_sites=1, ues_per_cell=4, duration=0.2, file_rate=60.0, srs_period=25.0)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
