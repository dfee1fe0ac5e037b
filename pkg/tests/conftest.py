import pytest

from torsionlab.geometry import Box, Disk
from torsionlab.solvers import spectral_product


@pytest.fixture(scope="session")
def square_128():
    return spectral_product(Box((1.0, 1.0)), 1 / 128)


@pytest.fixture(scope="session")
def disk_128():
    return spectral_product(Disk(1.0), 1 / 128)
