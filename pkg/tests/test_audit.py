import math

import numpy as np
import pytest
import scipy.sparse as sp

from src.eval.audit import collision_pair_stats, heavy_entry_audit, run
from src.models import HadamardBlock
from src.utils.general import derive_seed
from src.utils.sparsemat import SketchMatrix


def test_audit_hadamard(hadamard_sketch):
    audit = heavy_entry_audit(hadamard_sketch, 1 / 32)
    table = audit.table

    assert table["ell"].tolist() == [0, 1, 2]
    assert table["average_heavy"].tolist() == [0.0, 0.0, 4.0]
    assert table["theta"].tolist() == pytest.approx([1.0, math.sqrt(0.5), 0.5])
    assert table["cap"].tolist() == pytest.approx([1 / 360, 2 / 360, 4 / 360])
    assert audit.n_columns == 128 and not audit.empty

    assert audit.mean_sq_norm == pytest.approx(1.0)
    assert audit.layer_bound == pytest.approx(3.0)
    assert audit.mean_sq_norm <= audit.layer_bound
    assert audit.norm_budget == pytest.approx(4 * 5 / 360 + 4 * 8 / 32)


def test_audit_countsketch(countsketch_sketch):
    audit = heavy_entry_audit(countsketch_sketch, 1 / 64)
    assert audit.table["average_heavy"].tolist() == [1.0, 1.0, 1.0, 1.0]
    assert audit.mean_sq_norm <= audit.layer_bound


def test_audit_zero_and_rejects(zero_sketch):
    audit = heavy_entry_audit(zero_sketch, 1 / 32)
    assert audit.empty and audit.n_columns == 0
    assert (audit.table["average_heavy"] == 0).all()

    with pytest.raises(ValueError):
        heavy_entry_audit(zero_sketch, 0.1)


def test_collision_stats_on_orthogonal_blocks():
    # A single copy: same-block columns collide but are orthogonal.
    pi = HadamardBlock(64, 64, 1 / 32).generate()
    stats = collision_pair_stats(pi, list(range(10)), 1 / 32, d=32)

    assert stats.success_threshold == pytest.approx(5 / 32)
    assert stats.success_fraction == 0.0
    assert (stats.runs["pairs"] > 0).any()
    assert stats.delta_hat == 4.0
    assert stats.delta_hat_emitted == 4.0
    assert stats.p_hat_colliding == pytest.approx(0.25)
    assert list(stats.runs.columns) == ["seed", "pairs", "best_inner_product", "events", "success"]


def test_collision_stats_duplicated_columns():
    # Columns 0 and 1 are identical; all 16 columns are selected in every run.
    dense = np.zeros((15, 16))
    dense[0, 0] = dense[0, 1] = 1.0
    dense[np.arange(1, 15), np.arange(2, 16)] = 1.0
    pi = SketchMatrix(dense)
    stats = collision_pair_stats(pi, list(range(5)), 1 / 16, d=16, eta=1.0)

    assert stats.success_fraction == 1.0
    assert stats.mean_pairs == 1.0
    assert stats.runs["best_inner_product"].tolist() == [1.0] * 5


def test_collision_stats_zero_matrix():
    pi = SketchMatrix(sp.csc_matrix((16, 64)), 1)
    stats = collision_pair_stats(pi, [0, 1, 2], 1 / 16, d=32)
    assert stats.mean_pairs == 0.0
    assert stats.success_fraction == 0.0
    assert math.isnan(stats.delta_hat) and math.isnan(stats.delta_hat_emitted)


def test_collision_stats_general(hadamard_sketch):
    stats = collision_pair_stats(
        hadamard_sketch, [0, 1], 1 / 32, d=16, ell=2, ell_prime=2, abundance=1.0,
    )
    assert stats.success_threshold == pytest.approx(0.25 - 3 / 32)
    assert len(stats.runs) == 2


def test_collision_stats_counts_orthogonal_colliding_pairs():
    # Same-block Hadamard columns have inner product exactly 0, which meets a zero threshold.
    pi = HadamardBlock(64, 64, 1 / 32).generate()
    stats = collision_pair_stats(pi, list(range(3)), 1 / 32, d=32, kappa=8)
    assert stats.success_threshold == 0.0
    assert stats.p_hat_colliding == 1.0


def test_search_coins_are_independent_of_the_instance():
    # Every column is a good selector and they all share row 0, so the first pair is a random draw.
    pi = SketchMatrix(np.ones((1, 16)))
    pairs = [run(pi, 123, s, 1 / 16, 16, None, 0, 3.0, None)[1] for s in range(10)]
    assert all(len(p) == 1 for p in pairs)
    assert len({tuple(p) for p in pairs}) > 1

    again = [run(pi, 123, s, 1 / 16, 16, None, 0, 3.0, None)[1] for s in range(10)]
    assert again == pairs


def test_collision_stats_derives_instance_and_search_seeds(hadamard_sketch):
    seeds = [4, 5, 6]
    stats = collision_pair_stats(hadamard_sketch, seeds, 1 / 32, d=32)
    for seed, row in zip(seeds, stats.runs.itertuples()):
        record, _, _ = run(hadamard_sketch, derive_seed(seed, 1), derive_seed(seed, 2), 1 / 32, 32, None, 0, 3.0, None)
        assert row.seed == seed
        assert row.pairs == record["pairs"]
        assert row.events == record["events"]
