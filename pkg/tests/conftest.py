import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

from parisiphase.gauss import QuadratureConfig
from parisiphase.model import Model


@pytest.fixture(scope="session")
def cfg():
    return QuadratureConfig()


@pytest.fixture(scope="session")
def sk():
    return Model(((2, 0.5),))


@pytest.fixture(scope="session")
def pure4():
    return Model(((4, 0.25),))


@pytest.fixture(scope="session")
def mixed24():
    return Model(((2, 0.25), (4, 0.25)))
