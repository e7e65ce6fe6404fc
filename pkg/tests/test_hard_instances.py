import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from src.utils.general import InfeasibleInstanceError
from src.utils.hard_instances import (
    DBeta,
    format_instance,
    get_distribution,
    HardInstance,
    ladder_length,
    materialize_u,
    MixtureGeneral,
    MixtureS1,
    parse_instance,
    read_instance,
    sample_d_beta,
    sample_mixture_general,
    sample_mixture_s1,
    write_instance,
)


def dense_u(inst: HardInstance) -> np.ndarray:
    return np.column_stack([col.to_dense(inst.n) for col in materialize_u(inst)])


@seed(2)
@settings(max_examples=50, deadline=None)
@given(
    d=st.integers(min_value=1, max_value=8),
    log_r=st.integers(min_value=0, max_value=3),
    extra=st.integers(min_value=0, max_value=20),
    sample_seed=st.integers(min_value=0, max_value=2 ** 32),
)
def test_d_beta_hypothesis(d, log_r, extra, sample_seed):
    r = 2 ** log_r
    n = d * r + extra
    inst, label = DBeta(n, d, r).sample(sample_seed)

    assert inst.selectors.size == d * r
    assert np.unique(inst.selectors).size == d * r
    assert ((0 <= inst.selectors) & (inst.selectors < n)).all()
    assert set(inst.signs.tolist()) <= {-1, 1}
    assert label.beta == 1 / r and label.ell is None

    u = dense_u(inst)
    assert np.allclose(u.T @ u, np.eye(d), atol=1e-12)
    assert ((u != 0).sum(axis=0) == r).all()


def test_sampling_is_deterministic():
    a = sample_d_beta(100, 4, 2, seed=9)
    b = sample_d_beta(100, 4, 2, seed=9)
    assert np.array_equal(a.selectors, b.selectors)
    assert np.array_equal(a.signs, b.signs)


def test_hard_instance_validation():
    with pytest.raises(InfeasibleInstanceError):
        DBeta(7, 4, 2)
    with pytest.raises(ValueError):
        DBeta(10, 2, 3)
    with pytest.raises(ValueError):
        HardInstance(10, 2, 1, [1, 1], [1, -1])
    with pytest.raises(ValueError):
        HardInstance(10, 2, 1, [1, 2], [1, 0])
    with pytest.raises(ValueError):
        HardInstance(10, 2, 1, [1, 10], [1, 1])
    with pytest.raises(ValueError):
        HardInstance(10, 2, 1, [1, 2, 3], [1, 1, 1])


def test_blocks():
    inst = HardInstance(8, 2, 2, [5, 0, 3, 7], [1, -1, -1, 1])
    assert inst.selector_position(3) == 2
    assert inst.block_of(inst.selector_position(0)) == 0
    assert inst.block_of(inst.selector_position(7)) == 1
    with pytest.raises(ValueError):
        inst.selector_position(1)

    cols = materialize_u(inst)
    assert cols[0].indices.tolist() == [0, 5]
    assert np.allclose(cols[0].values, [-1 / np.sqrt(2), 1 / np.sqrt(2)])

    moved = inst.with_selectors([10, 11, 12, 13], 20)
    assert moved.n == 20 and np.array_equal(moved.signs, inst.signs)


def test_mixture_s1():
    dist = MixtureS1(200, 4, 1 / 32)
    assert dist.r_max == 4 and dist.r_or_family == "mix_s1"
    labels = [dist.sample(s)[1] for s in range(200)]
    assert {label.ell for label in labels} == {0, 2}
    for s in range(20):
        inst, label = sample_mixture_s1(200, 4, 1 / 32, seed=s)
        assert inst.r == 2 ** label.ell

    with pytest.raises(ValueError):
        MixtureS1(200, 4, 0.05)


def test_mixture_general():
    assert ladder_length(1 / 64) == 3
    assert ladder_length(1 / 32) == 2
    assert ladder_length(1 / 16) == 1
    assert ladder_length(0.1) == 0

    dist = MixtureGeneral(400, 4, 1 / 64)
    assert dist.r_max == 8
    ells = [dist.sample(s)[1].ell for s in range(400)]
    assert set(ells) == {0, 1, 2, 3}
    assert 0.4 < ells.count(0) / len(ells) < 0.6

    inst, label = sample_mixture_general(400, 4, 1 / 64, seed=1)
    assert inst.r == 2 ** label.ell

    with pytest.raises(ValueError):
        MixtureGeneral(400, 4, 0.1)
    with pytest.raises(InfeasibleInstanceError):
        MixtureGeneral(20, 4, 1 / 64)


def test_get_distribution():
    assert isinstance(get_distribution("dbeta", 10, 2), DBeta)
    assert get_distribution("d_beta", 10, 2, r=4).r_or_family == "4"
    assert isinstance(get_distribution("mix_s1", 100, 2, eps=1 / 16), MixtureS1)
    assert isinstance(get_distribution("mix_general", 100, 2, eps=1 / 16), MixtureGeneral)
    with pytest.raises(ValueError):
        get_distribution("mix_s1", 100, 2)
    with pytest.raises(ValueError):
        get_distribution("uniform", 100, 2)


def test_oseinst_format(tmp_path):
    inst = HardInstance(8, 2, 2, [5, 0, 3, 7], [1, -1, -1, 1])
    text = format_instance(inst, ["seed: 1"])
    assert text == "OSEINST 8 2 2\n# seed: 1\nC: 5 0 3 7\nS: +1 -1 -1 +1\n"

    path = tmp_path / "u.inst"
    write_instance(str(path), inst)
    parsed = read_instance(str(path))
    assert np.array_equal(parsed.selectors, inst.selectors)
    assert np.array_equal(parsed.signs, inst.signs)

    for bad in ["OSEINST 8 2 2\nC: 1 2 3 4\n", "OSE1 8 2 2\nC: 1\nS: +1\n", "OSEINST 8 2 2\nS: +1\nC: 1\n"]:
        with pytest.raises(ValueError):
            parse_instance(bad)


@pytest.mark.slow
def test_selector_marginals_are_uniform():
    counts = np.zeros((3, 10), dtype=np.int64)
    positive = 0
    dist = DBeta(10, 3)
    for s in range(100_000):
        inst, _ = dist.sample(s)
        counts[np.arange(3), inst.selectors] += 1
        positive += int(inst.signs[0] == 1)

    for row in counts:
        assert chisquare(row).pvalue > 0.001
    assert abs(positive / 100_000 - 0.5) <= 0.01


def test_mixture_branch_frequencies():
    s1 = MixtureS1(200, 4, 1 / 32)
    general = MixtureGeneral(400, 4, 1 / 64)
    s1_ells = np.array([s1.sample(s)[1].ell for s in range(10_000)])
    general_ells = np.array([general.sample(s)[1].ell for s in range(10_000)])

    assert abs(np.mean(s1_ells == 0) - 0.5) <= 0.02
    assert abs(np.mean(general_ells == 0) - 0.5) <= 0.02
    sparse = np.bincount(general_ells[general_ells > 0], minlength=4)[1:]
    assert chisquare(sparse).pvalue > 0.001


def test_materialized_columns_are_orthonormal():
    rng = np.random.default_rng(21)
    worst = 0.0
    for s in range(1000):
        r = int(rng.choice([1, 2, 4, 8]))
        d = int(rng.integers(1, 9))
        n = d * r + int(rng.integers(0, 40))
        u = dense_u(DBeta(n, d, r).sample(s)[0])
        worst = max(worst, np.abs(u.T @ u - np.eye(d)).max())
    assert worst <= 1e-12
