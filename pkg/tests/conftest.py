import numpy as np
import pytest

from sgpe.hermite import BasisTable


@pytest.fixture(scope="session")
def bt8():
    return BasisTable(8)


@pytest.fixture(scope="session")
def bt16():
    return BasisTable(16)


@pytest.fixture(scope="session")
def bt32():
    return BasisTable(32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
