import numpy as np
import pytest

from src.models import CountSketch, GaussianSketch, HadamardBlock, OSNAP
from src.utils.construction import (
    build_construction,
    ConstructionSpec,
    get_construction,
    KINDS,
    make_construction,
)
from src.utils.sparsemat import SketchMatrix


def test_get_construction():
    assert [get_construction(kind) for kind in KINDS] == [CountSketch, OSNAP, GaussianSketch, HadamardBlock]
    with pytest.raises(ValueError):
        get_construction("srht")


def test_make_construction():
    assert make_construction("osnap", 16, 32, s=2).s == 2
    assert make_construction("hadamard_block", 16, 32, eps=1 / 16).s == 2
    assert make_construction("countsketch", 16, 32, s=5, eps=0.1).s == 1
    with pytest.raises(ValueError):
        make_construction("hadamard_block", 16, 32)


def test_build_construction():
    spec = ConstructionSpec("osnap", 8, 20, s=2, seed=4)
    pi = build_construction(spec)
    assert isinstance(pi, SketchMatrix)
    assert np.array_equal(pi.toarray(), OSNAP(8, 20, 2).generate(4).toarray())

    assert build_construction(ConstructionSpec("gaussian", 4, 6)).shape == (4, 6)

    with pytest.raises(ValueError):
        ConstructionSpec("countsketch", 8, 20, seed=-1)
    with pytest.raises(ValueError):
        ConstructionSpec("osnap", 8, 20, s=9)
