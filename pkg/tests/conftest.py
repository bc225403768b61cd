"""Shared meshes and analyses; reference-mesh analyses are built once per session."""
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from layerdecomp.mesh import make_icosphere, make_torus
from layerdecomp.operators import AssemblyConfig, BoundaryOperators
from layerdecomp.subspaces import Analysis

settings.register_profile(
    "layerdecomp",
    deadline=None,
    max_examples=30,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("layerdecomp")


def _analysis(mesh, flip=False):
    return Analysis(BoundaryOperators(mesh, AssemblyConfig(flip_kernel_sign=flip)))


@pytest.fixture(scope="session")
def sphere2():
    return _analysis(make_icosphere(2))


@pytest.fixture(scope="session")
def torus12():
    return _analysis(make_torus(12, 8, 2.0, 0.5))


@pytest.fixture(scope="session")
def sphere3():
    return _analysis(make_icosphere(3))


@pytest.fixture(scope="session")
def torus24():
    return _analysis(make_torus(24, 16, 2.0, 0.5))


@pytest.fixture(scope="session")
def sphere3_flipped():
    return _analysis(make_icosphere(3), flip=True)


@pytest.fixture(scope="session")
def torus24_flipped():
    return _analysis(make_torus(24, 16, 2.0, 0.5), flip=True)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record and print the one-line verdict of an acceptance criterion."""

    def _report(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
