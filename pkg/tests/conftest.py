import pytest

from lorentz_fick import KineticParams, RadialPotential


@pytest.fixture
def quartic():
    return RadialPotential.quartic()


@pytest.fixture
def base_params():
    return KineticParams(epsilon=0.05, alpha=0.1, lam=0.05, mu=1.0, L=1.0, rho1=1.0, rho2=2.0)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
