import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pclab.geometry.domain import PolygonalDomain
from pclab.geometry.graph import GlueGraph
from pclab.pde.force import ForceSpec
from pclab.pde.mesh import build_mesh

settings.register_profile("pclab", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=40)
settings.load_profile("pclab")

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def disk():
    return PolygonalDomain.disk((0.0, 0.0), 1.0, h=1 / 16)


@pytest.fixture(scope="session")
def coarse_disk_mesh(disk):
    return build_mesh(disk, GlueGraph.empty(), 1 / 16)


@pytest.fixture(scope="session")
def unit_force():
    return ForceSpec.constant(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
