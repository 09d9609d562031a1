import numpy as np
import pytest

from quartetodmr import QuartetParams, ReadoutModel


@pytest.fixture
def params():
    return QuartetParams()


@pytest.fixture
def readout():
    return ReadoutModel()


@pytest.fixture
def init_state():
    return np.diag([0.0, 0.5, 0.5, 0.0]).astype(complex)
