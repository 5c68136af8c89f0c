import numpy as np
import pytest

from floquet_lap.cell import MediumSpec, assemble_operators, build_basis, bump_source
from floquet_lap.multipliers import floquet_multipliers

K2 = 3 * np.pi**2

# Lines collected by the acceptance tests and echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def perturbed_medium() -> MediumSpec:
    """q = 1 + cos(2 pi x1) / 2."""
    return MediumSpec.fourier_cosine([[0, 0, 1.0], [1, 0, 0.25], [-1, 0, 0.25]])


@pytest.fixture(scope="session")
def ops_const():
    return assemble_operators(build_basis(8, 6), MediumSpec.constant(1.0))


@pytest.fixture(scope="session")
def ops_pert():
    return assemble_operators(build_basis(8, 6), perturbed_medium())


@pytest.fixture(scope="session")
def mset_const(ops_const):
    return floquet_multipliers(ops_const, K2)


@pytest.fixture(scope="session")
def mset_pert(ops_pert):
    return floquet_multipliers(ops_pert, K2)


@pytest.fixture(scope="session")
def source(ops_const):
    f = bump_source(ops_const.basis, {0: 1.0, 1: 0.5, 2: 0.3j, 3: 0.2})
    return f * (1.0 / f.norm())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
