import math
from collections import defaultdict

import numpy as np
import pytest
import scipy.sparse as sp

from src.models import CountSketch, OSNAP
from src.models.adversary import (
    abundance_scale,
    collide,
    delta_prime,
    EVENT_KINDS,
    find_colliding_pairs,
    find_colliding_pairs_general,
    heavy_indicator,
    heavy_profile,
    mean_shared_heavy_rows,
    shared_heavy_rows,
)
from src.utils.general import derive_seed, DimensionMismatchError, NotApplicableError
from src.utils.hard_instances import DBeta, HardInstance
from src.utils.sparsemat import SketchMatrix

EPS = 1 / 16  # heaviness √(8·eps) = 1/√2, one heavy entry makes a column good


def one_hot_sketch(rows: list[list[int]], m: int) -> SketchMatrix:
    """Columns with equal entries on the given rows, normalized to unit norm."""
    dense = np.zeros((m, len(rows)))
    for j, r in enumerate(rows):
        dense[r, j] = 1 / math.sqrt(len(r))
    return SketchMatrix(dense)


def all_selectors(n: int) -> HardInstance:
    return HardInstance(n, n, 1, np.arange(n)[::-1], np.ones(n))


def test_heavy_profile(hadamard_sketch, countsketch_sketch, zero_sketch):
    profile = heavy_profile(hadamard_sketch, math.sqrt(8 / 32), 1 / 32, 2)
    assert (profile.per_column_counts == 4).all()
    assert profile.average == 4.0
    assert profile.good_columns == frozenset(range(128))

    profile = heavy_profile(countsketch_sketch, 0.5, 0.1, 1)
    assert (profile.per_column_counts == 1).all()

    profile = heavy_profile(zero_sketch, 0.5, 0.1, 1)
    assert profile.average == 0.0 and not profile.good_columns

    with pytest.raises(ValueError):
        heavy_indicator(zero_sketch, 0.0)


def test_good_columns_need_unit_norm():
    pi = SketchMatrix(np.diag([1.0, 2.0, 0.9]))
    assert heavy_profile(pi, 0.5, 0.15, 1).good_columns == frozenset({0, 2})
    assert heavy_profile(pi, 0.5, 0.05, 1).good_columns == frozenset({0})


def test_shared_heavy_rows(hadamard_sketch):
    assert shared_heavy_rows(hadamard_sketch, 0, 65, 0.5) == [0, 1, 2, 3]
    assert collide(hadamard_sketch, 1, 2, 0.5)
    assert not collide(hadamard_sketch, 1, 4, 0.5)
    assert not collide(hadamard_sketch, 0, 1, 0.6)

    assert mean_shared_heavy_rows(hadamard_sketch, 0.5, np.arange(8)) == 4.0
    assert mean_shared_heavy_rows(SketchMatrix(sp.identity(5, format="csc")), 0.5, np.arange(5)) == 1.0
    assert math.isnan(mean_shared_heavy_rows(SketchMatrix(sp.csc_matrix((3, 3))), 0.5, np.arange(3)))


def test_abundance():
    assert delta_prime(1 / 32) == pytest.approx(math.log2(360) / 5)
    assert abundance_scale(1 / 32) == pytest.approx(1 / 360)
    with pytest.raises(ValueError):
        delta_prime(1.0)


def test_two_good_columns_sharing_a_row():
    # Columns 0 and 1 share row 0; columns 2..15 sit in rows 1..14.
    pi = one_hot_sketch([[0], [0]] + [[i] for i in range(1, 15)], 15)
    pairs, trace = find_colliding_pairs(pi, all_selectors(16), EPS, eta=1.0, seed=0)

    assert len(pairs) == 1
    assert set(pairs[0]) == {0, 1}
    assert trace.budget == 1
    assert trace.events[-1].kind == "row_pair"
    assert trace.events[-1].row == 0


def test_disjoint_supports():
    pi = SketchMatrix(sp.identity(16, format="csc"))
    pairs, trace = find_colliding_pairs(pi, all_selectors(16), EPS, seed=0)
    assert pairs == []
    assert [event.kind for event in trace.events] == ["miss"]


def test_collision_graph_is_respected():
    # a = 0 and b = 1 share row 0, b and c = 2 share row 1, a and c share nothing.
    pi = one_hot_sketch([[0], [0, 1], [1]] + [[i] for i in range(2, 15)], 15)
    for s in range(20):
        pairs, _ = find_colliding_pairs(pi, all_selectors(16), EPS, eta=1.0, seed=s)
        for a, b in pairs:
            assert collide(pi, a, b, math.sqrt(8 * EPS))
            assert {a, b} != {0, 2}


def check_search_invariants(pi: SketchMatrix, inst: HardInstance, s: int) -> None:
    pairs, trace = find_colliding_pairs(pi, inst, EPS, seed=s, record_sets=True)
    good = heavy_profile(pi, trace.theta, EPS, trace.good_count_threshold).good_columns

    assert trace.theta == pytest.approx(math.sqrt(0.5))
    assert trace.good_count_threshold == 1
    assert trace.budget == 2
    assert trace.phi_bound == pytest.approx(3 / 32)

    used = [c for pair in pairs for c in pair]
    assert len(used) == len(set(used))
    for a, b in pairs:
        assert a != b and a in good and b in good
        assert shared_heavy_rows(pi, a, b, trace.theta)

    by_iteration = defaultdict(list)
    for prev, event in zip(trace.events, trace.events[1:]):
        assert event.s_before == prev.s_after
        assert event.g_before == prev.g_after
    for event in trace.events:
        assert event.kind in EVENT_KINDS
        assert event.s_after <= event.s_before
        assert event.g_after <= event.g_before
        assert event.g_size_after == len(event.g_after)
        by_iteration[event.j].append(event)
    for events in by_iteration.values():
        assert len(events[0].s_before) - len(events[-1].s_after) <= 2

    # Pairs, misses and skips only happen once every collision probability is at most eta/d.
    h = heavy_indicator(pi, trace.theta)
    for event in trace.events:
        if event.kind in ("pair", "miss", "skip") and event.g_before:
            hg = h[:, sorted(event.g_before)]
            collisions = (hg.T @ hg).tocsr().getnnz(axis=1)
            assert collisions.max() <= trace.phi_bound * len(event.g_before) + 1e-9


@pytest.mark.parametrize("s", range(10))
def test_structural_invariants(s):
    check_search_invariants(CountSketch(8, 64).generate(s), DBeta(64, 32).sample(s)[0], s)


@pytest.mark.slow
def test_structural_invariants_many_runs():
    for s in range(500):
        construction = CountSketch(8, 64) if s % 2 == 0 else OSNAP(16, 64, 2)
        check_search_invariants(construction.generate(s), DBeta(64, 32).sample(derive_seed(s, 1))[0], s)


def test_pair_search_edge_cases(zero_sketch):
    inst = DBeta(64, 32).sample(0)[0]
    pairs, trace = find_colliding_pairs(zero_sketch, inst, EPS)
    assert pairs == [] and trace.selectors == [] and len(trace) == 0

    with pytest.raises(NotApplicableError):
        find_colliding_pairs(zero_sketch, DBeta(64, 4, 2).sample(0)[0], EPS)
    with pytest.raises(DimensionMismatchError):
        find_colliding_pairs(zero_sketch, DBeta(65, 32).sample(0)[0], EPS)
    with pytest.raises(ValueError):
        find_colliding_pairs(zero_sketch, inst, EPS, eta=0.0)


def test_general_degenerates_to_d1_search(hadamard_sketch):
    eps = 1 / 32
    inst = DBeta(128, 64).sample(1)[0]
    pairs, trace = find_colliding_pairs(hadamard_sketch, inst, eps, seed=2)
    pairs_g, trace_g = find_colliding_pairs_general(
        hadamard_sketch, inst, eps, ell=2, ell_prime=0, seed=2, abundance=1.0,
    )

    assert trace_g.theta == trace.theta
    assert trace_g.good_count_threshold == trace.good_count_threshold
    assert trace_g.phi_bound == trace.phi_bound
    assert trace_g.budget == trace.budget
    assert trace_g.selectors == trace.selectors
    assert pairs_g == pairs


def test_general_on_hadamard_blocks(hadamard_sketch):
    theta = math.sqrt(2.0 ** -2)
    for c in range(8):
        for c2 in range(128):
            same_block = (c % 64) // 4 == (c2 % 64) // 4
            assert collide(hadamard_sketch, c, c2, theta) == same_block

    inst = DBeta(128, 64).sample(3)[0]
    pairs, trace = find_colliding_pairs_general(
        hadamard_sketch, inst, 1 / 32, ell=2, ell_prime=0, seed=3, abundance=1.0,
    )
    for a, b in pairs:
        assert (a % 64) // 4 == (b % 64) // 4


def test_general_sparse_instances(hadamard_sketch, zero_sketch):
    inst = DBeta(128, 16, 4).sample(0)[0]
    pairs, trace = find_colliding_pairs_general(hadamard_sketch, inst, 1 / 32, 2, 2, abundance=1.0)
    assert trace.budget == 4
    assert len(trace.selectors) == 64
    used = [c for pair in pairs for c in pair]
    assert len(used) == len(set(used))

    pairs, _ = find_colliding_pairs_general(zero_sketch, DBeta(64, 8, 2).sample(0)[0], 1 / 32, 2, 1)
    assert pairs == []

    with pytest.raises(ValueError):
        find_colliding_pairs_general(hadamard_sketch, inst, 1 / 32, 2, 1)
    with pytest.raises(ValueError):
        find_colliding_pairs_general(hadamard_sketch, inst, 1 / 32, 2, 2, abundance=1.5)


def test_trace_lines():
    pi = one_hot_sketch([[0], [0]] + [[i] for i in range(1, 15)], 15)
    _, trace = find_colliding_pairs(pi, all_selectors(16), EPS, eta=1.0, seed=0)
    lines = trace.to_lines()
    assert all(line.startswith("# ") for line in lines[:5])
    assert lines[5].startswith("k=0 j=0 kind=row_pair row=0 pair=")
    assert len(lines) == 5 + len(trace)
