import numpy as np
import pytest
from scipy.stats import chisquare

from src.models import CountSketch, GaussianSketch, HadamardBlock, OSNAP
from src.models.sketches import gen_countsketch, gen_gaussian, gen_hadamard_block, gen_osnap
from src.utils.sparsemat import column_norms, SketchMatrix


def test_countsketch():
    pi = gen_countsketch(16, 64, seed=1)
    assert (pi.rows, pi.cols, pi.max_col_nnz) == (16, 64, 1)
    assert (pi.nnz_per_column() == 1).all()
    assert set(np.abs(pi.matrix.data)) == {1.0}

    assert np.array_equal(pi.toarray(), gen_countsketch(16, 64, seed=1).toarray())
    assert not np.array_equal(pi.toarray(), gen_countsketch(16, 64, seed=2).toarray())


def test_countsketch_rows_uniform():
    pi = gen_countsketch(8, 8000, seed=3)
    counts = np.bincount(pi.matrix.indices, minlength=8)
    assert chisquare(counts).pvalue > 1e-6


@pytest.mark.parametrize("Construction, args", [
    (CountSketch, (16, 64)),
    (OSNAP, (16, 64, 4)),
    (GaussianSketch, (8, 20)),
])
def test_column_subset_matches_full(Construction, args):
    construction = Construction(*args)
    full = construction.generate_sketch(5).toarray()
    columns = [3, 0, 17, 3]
    part = construction.generate_sketch(5, columns=columns).toarray()

    assert np.array_equal(part[:, [0, 3, 17]], full[:, [0, 3, 17]])
    rest = np.setdiff1d(np.arange(full.shape[1]), columns)
    assert not part[:, rest].any()

    with pytest.raises(IndexError):
        construction.generate(5, columns=[full.shape[1]])


def test_osnap():
    pi = gen_osnap(32, 100, 4, seed=0)
    assert pi.max_col_nnz == 4
    assert (pi.nnz_per_column() == 4).all()
    assert np.allclose(np.abs(pi.matrix.data), 0.5)
    assert np.allclose(column_norms(pi), 1.0)

    for s in (0, 33):
        with pytest.raises(ValueError):
            OSNAP(32, 100, s)


def test_gaussian():
    a = gen_gaussian(8, 20, seed=0)
    assert a.shape == (8, 20)
    assert np.array_equal(a, gen_gaussian(8, 20, seed=0))
    pi = GaussianSketch(8, 20).generate_sketch(0)
    assert isinstance(pi, SketchMatrix)
    assert pi.max_col_nnz == 8


def test_hadamard_block(hadamard_sketch):
    a = hadamard_sketch.toarray()
    assert hadamard_sketch.max_col_nnz == 4
    assert np.allclose(np.abs(hadamard_sketch.matrix.data), 0.5)
    assert np.allclose(column_norms(hadamard_sketch), 1.0)
    assert np.array_equal(a[:, :64], a[:, 64:])
    assert np.allclose(a[:, :64].T @ a[:, :64], np.eye(64), atol=1e-12)

    # Column c lives in rows 4·(c mod 64 div 4) .. +4.
    assert hadamard_sketch.column(70).indices.tolist() == [4, 5, 6, 7]
    assert np.array_equal(gen_hadamard_block(1 / 32, 64, 128).toarray(), a)


@pytest.mark.parametrize("m, eps", [(64, 0.03), (64, 0.2), (6, 1 / 32), (64, 0.0)])
def test_hadamard_block_rejects(m, eps):
    with pytest.raises(ValueError):
        HadamardBlock(m, 10, eps)


def test_dimensions():
    for m, n in [(0, 5), (5, 0)]:
        with pytest.raises(ValueError):
            CountSketch(m, n)
