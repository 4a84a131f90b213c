"""
Shared fixtures
"""
import math

import numpy as np
import pytest

from measured_ising.services.couplings import couplings_from_times
from measured_ising.services.lattice_builder import build_lattice

QUARTER = math.pi / 4


@pytest.fixture(scope="session")
def lieb2():
    return build_lattice("lieb_square", 2)


@pytest.fixture(scope="session")
def lieb1():
    return build_lattice("lieb_square", 1)


@pytest.fixture(scope="session")
def chain4():
    return build_lattice("chain", 4)


@pytest.fixture(scope="session")
def hex2():
    return build_lattice("heavy_hexagon", (2, 3))


@pytest.fixture(scope="session")
def cube():
    return build_lattice("cubic3d", (2, 2, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def nishimori_params():
    """Couplings at t_A = pi/8 on the Nishimori cut."""
    return couplings_from_times(math.pi / 8, QUARTER)


@pytest.fixture
def config_file(tmp_path):
    """Write a YAML overlay and return its path."""
    def write(text: str):
        path = tmp_path / "overlay.yaml"
        path.write_text(text)
        return path
    return write
