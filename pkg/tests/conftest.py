import numpy as np
import pytest

import mfmicro as mf


@pytest.fixture(scope="session")
def grid16():
    return mf.build_grid(1, (0.0, 1.0), 16)


@pytest.fixture(scope="session")
def grid8():
    return mf.build_grid(1, (0.0, 1.0), 8)


@pytest.fixture(scope="session")
def grid3d4():
    return mf.build_grid(3, (0.0, 1.0), 4)


@pytest.fixture(scope="session")
def coulomb_pot():
    return mf.softened_coulomb(0.1)


@pytest.fixture(scope="session")
def coulomb16(grid16, coulomb_pot):
    return mf.assemble_kernel(coulomb_pot, grid16)


@pytest.fixture(scope="session")
def zero16(grid16):
    return mf.assemble_kernel(mf.zero_potential(), grid16)


def random_density(grid, rng):
    v = rng.random(grid.n_nodes) + 1e-3
    return mf.density_from_values(grid, v, normalize=True)
