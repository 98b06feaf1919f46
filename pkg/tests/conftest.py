import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nsfem.mesh import alfeld_split, build_structured_mesh
from nsfem.space import build_pressure_space, build_velocity_space


@pytest.fixture(scope="session")
def two_cell():
    return build_structured_mesh(1)


@pytest.fixture(scope="session")
def spaces_k4_two_cell(two_cell):
    return (build_velocity_space(two_cell, 4),
            build_pressure_space(two_cell, 3))


@pytest.fixture(scope="session")
def spaces_k2_alfeld4():
    mesh = alfeld_split(build_structured_mesh(4))
    return (build_velocity_space(mesh, 2), build_pressure_space(mesh, 1))


@pytest.fixture(scope="session")
def spaces_k2_alfeld8():
    mesh = alfeld_split(build_structured_mesh(8))
    return (build_velocity_space(mesh, 2), build_pressure_space(mesh, 1))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
