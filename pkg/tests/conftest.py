import numpy as np
import pytest

from fluxfem.problems import affine_problem, constant_problem, trig_problem


@pytest.fixture(scope="session")
def trig():
    return trig_problem()


@pytest.fixture(scope="session")
def affine():
    return affine_problem(1.0, 1.0, 0.0)


@pytest.fixture(scope="session")
def const():
    return constant_problem(1.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
