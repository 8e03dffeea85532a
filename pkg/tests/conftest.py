import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from cglab.config import load_config  # noqa: E402
from cglab.spectral import assemble_operators  # noqa: E402
from cglab.surface import build_surface, validate_config  # noqa: E402
from helpers import CONFIG_DIR, cube_points  # noqa: E402


@pytest.fixture(scope="session")
def cap_config():
    return load_config(os.path.join(CONFIG_DIR, "cap.cfg")).branch


@pytest.fixture(scope="session")
def cube_config():
    return validate_config(cube_points(), 1.0, 2)


@pytest.fixture(scope="session")
def cap_mesh(cap_config):
    return build_surface(cap_config, level=2)


@pytest.fixture(scope="session")
def cap_mesh_l1(cap_config):
    return build_surface(cap_config, level=1)


@pytest.fixture(scope="session")
def cap_ops(cap_mesh):
    return assemble_operators(cap_mesh)


@pytest.fixture(scope="session")
def cube_mesh(cube_config):
    return build_surface(cube_config, level=2)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
