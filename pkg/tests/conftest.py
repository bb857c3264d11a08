import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from bvortex.geometry import ConformalDomain, build_mesh

settings.register_profile("lab", deadline=None, max_examples=50)
settings.load_profile("lab")

ORACLES = json.loads((Path(__file__).parent / "oracles" / "values.json").read_text())


@pytest.fixture(scope="session")
def oracle():
    return ORACLES


@pytest.fixture(scope="session")
def disk():
    return ConformalDomain.disk()


@pytest.fixture(scope="session")
def poly():
    # Phi(z) = z + 0.2 z^3, elongated along the real axis
    return ConformalDomain([1.0, 0.0, 0.2])


@pytest.fixture(scope="session")
def disk_mesh(disk):
    return build_mesh(disk, 0.1, 0.02)


@pytest.fixture(scope="session")
def poly_mesh(poly):
    return build_mesh(poly, 0.1, 0.02)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
