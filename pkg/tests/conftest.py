from __future__ import annotations

import numpy as np
import pytest

from harvestreg.hjb import PdeGrid, solve, z_feedback
from harvestreg.model import reference_params


@pytest.fixture(scope="session")
def params():
    return reference_params()


@pytest.fixture(scope="session")
def ref_grid(params):
    return PdeGrid.from_params(params)


@pytest.fixture(scope="session")
def surface(params, ref_grid):
    return solve(params, ref_grid)


@pytest.fixture(scope="session")
def policy(surface):
    return z_feedback(surface)


@pytest.fixture(scope="session")
def coarse_grid(params):
    return PdeGrid.from_params(params, 500, 1250)


@pytest.fixture(scope="session")
def coarse_surface(params, coarse_grid):
    return solve(params, coarse_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
