import pytest
import scipy.sparse as sp

from src.models import CountSketch, HadamardBlock
from src.utils.sparsemat import SketchMatrix


@pytest.fixture
def hadamard_sketch() -> SketchMatrix:
    """Hadamard blocks with eps = 1/32 (order 4), m = 64 and two copies, n = 128."""
    return HadamardBlock(64, 128, 1 / 32).generate()


@pytest.fixture
def countsketch_sketch() -> SketchMatrix:
    return CountSketch(16, 64).generate(7)


@pytest.fixture
def zero_sketch() -> SketchMatrix:
    return SketchMatrix(sp.csc_matrix((16, 64)), 1)
