import numpy as np
import pytest

from ouflow.field_grid import Grid
from ouflow.signals import MatrixSignal, VectorSignal


@pytest.fixture
def grid2():
    return Grid(2, 12.0, 64)


@pytest.fixture
def rot():
    return MatrixSignal.constant([[0.0, -1.0], [1.0, 0.0]])


@pytest.fixture
def zero2():
    return MatrixSignal.zero(2), VectorSignal.zero(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
