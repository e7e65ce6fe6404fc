"""Heavy-entry statistics and the search for disjoint colliding column pairs."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from src.utils.general import DEFAULT_SEED, DimensionMismatchError, get_rng, NotApplicableError
from src.utils.hard_instances import HardInstance
from src.utils.sparsemat import column_norms, SketchMatrix

logger = logging.getLogger(__name__)

# Relative slack on the heaviness threshold, so that e.g. 1/√8 counts as √(1/8)-heavy.
HEAVY_RTOL = 1e-12

EVENT_KINDS = ("row", "row_single", "row_pair", "skip", "pair", "miss", "exhausted")


@dataclass(frozen=True, eq=False)
class HeavyProfile:
    """Per-column counts of θ-heavy entries and the resulting good columns.

    Attributes:
        theta: heaviness threshold.
        per_column_counts: number of entries with absolute value at least theta, per column.
        average: mean of `per_column_counts`.
        good_columns: columns with enough heavy entries and norm in [1 - eps, 1 + eps].
    """

    theta: float
    per_column_counts: NDArray[np.int64]
    average: float
    good_columns: frozenset[int]


def heavy_indicator(pi: SketchMatrix, theta: float) -> sp.csc_matrix:
    """Boolean pattern (as int32 ones) of the θ-heavy entries of `pi`."""
    if theta <= 0:
        raise ValueError(f"Heaviness threshold must be positive, got {theta}.")
    a = pi.matrix
    keep = np.abs(a.data) >= theta * (1 - HEAVY_RTOL)
    indptr = np.concatenate([[0], np.cumsum(keep)])[a.indptr]
    return sp.csc_matrix(
        (np.ones(int(keep.sum()), dtype=np.int32), a.indices[keep], indptr),
        shape=a.shape,
    )


def heavy_profile(
    pi: SketchMatrix,
    theta: float,
    eps: float,
    good_count_threshold: int,
) -> HeavyProfile:
    """Count θ-heavy entries per column and select the good columns."""
    counts = np.diff(heavy_indicator(pi, theta).indptr)
    norm_ok = np.abs(column_norms(pi) - 1) <= eps
    good = np.flatnonzero((counts >= good_count_threshold) & norm_ok)
    return HeavyProfile(
        theta=theta,
        per_column_counts=counts,
        average=float(counts.mean()),
        good_columns=frozenset(int(c) for c in good),
    )


def shared_heavy_rows(pi: SketchMatrix, a: int, b: int, theta: float) -> list[int]:
    """Rows in which both columns carry a θ-heavy entry."""
    col_a, col_b = pi.column(a), pi.column(b)
    thr = theta * (1 - HEAVY_RTOL)
    rows_a = col_a.indices[np.abs(col_a.values) >= thr]
    rows_b = col_b.indices[np.abs(col_b.values) >= thr]
    return [int(r) for r in np.intersect1d(rows_a, rows_b, assume_unique=True)]


def collide(pi: SketchMatrix, a: int, b: int, theta: float) -> bool:
    """Whether two columns share at least one θ-heavy row."""
    return bool(shared_heavy_rows(pi, a, b, theta))


def mean_shared_heavy_rows(pi: SketchMatrix, theta: float, columns: NDArray[np.int64]) -> float:
    """Mean number of shared θ-heavy rows over all colliding ordered pairs of `columns`.

    Pairs (c, c) are included. Returns nan when no pair collides.
    """
    h = heavy_indicator(pi, theta)[:, np.asarray(columns, dtype=np.int64)]
    shared = (h.T @ h).tocsr()
    if shared.nnz == 0:
        return float("nan")
    return float(shared.data.sum() / shared.nnz)


def delta_prime(eps: float) -> float:
    """Exponent δ' = log2 log2(1/eps^72) / log2(1/eps)."""
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}.")
    return math.log2(72 * math.log2(1 / eps)) / math.log2(1 / eps)


def abundance_scale(eps: float) -> float:
    """Abundance factor eps^δ' (equal to 1 / (72 log2(1/eps)))."""
    return eps ** delta_prime(eps)


@dataclass(frozen=True)
class TraceEvent:
    """One output of the pair search.

    Kinds: `row` for (ℓ, ⊥) inside the while loop, `row_single` for (ℓ, ⊥) when a single
    selector is heavy in row ℓ, `row_pair` and `pair` for emitted pairs, `skip` for (⊥, ⊥),
    `miss` for (⊥, C_j) and `exhausted` when no selector index is left.
    """

    k: int
    j: int
    kind: str
    row: int | None = None
    pair: tuple[int, int] | None = None
    s_before: frozenset[int] = frozenset()
    s_after: frozenset[int] = frozenset()
    g_size_before: int = 0
    g_size_after: int = 0
    g_before: frozenset[int] | None = None
    g_after: frozenset[int] | None = None

    def to_line(self) -> str:
        row = "-" if self.row is None else self.row
        pair = "-" if self.pair is None else f"{self.pair[0]},{self.pair[1]}"
        return (
            f"k={self.k} j={self.j} kind={self.kind} row={row} pair={pair} "
            f"G={self.g_size_before}->{self.g_size_after} "
            f"S={len(self.s_before)}->{len(self.s_after)}"
        )


@dataclass
class PairSearchTrace:
    """Resolved thresholds, good selectors and the event log of one pair search."""

    theta: float
    good_count_threshold: int
    phi_bound: float
    budget: int
    selectors: list[int]
    events: list[TraceEvent] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    def to_lines(self) -> list[str]:
        header = [
            f"# theta: {self.theta!r}",
            f"# good_count_threshold: {self.good_count_threshold}",
            f"# phi_bound: {self.phi_bound!r}",
            f"# budget: {self.budget}",
            f"# selectors: {' '.join(str(c) for c in self.selectors)}",
        ]
        return header + [event.to_line() for event in self.events]


class _PairSearch:
    """State of one run of the colliding-pair search."""

    def __init__(
        self,
        pi: SketchMatrix,
        good: frozenset[int],
        selectors: list[int],
        theta: float,
        record_sets: bool,
    ) -> None:
        self.h = heavy_indicator(pi, theta)
        self.h_rows = self.h.tocsr()
        self.in_g = np.zeros(pi.cols, dtype=bool)
        self.in_g[list(good)] = True
        self.c = selectors
        self.s = set(range(len(selectors)))
        self.heavy = [frozenset(self._heavy_rows(col).tolist()) for col in selectors]
        self.record_sets = record_sets
        self.k = 0

    def _heavy_rows(self, col: int) -> NDArray[np.int64]:
        return self.h.indices[self.h.indptr[col]:self.h.indptr[col + 1]]

    def _row_members(self, row: int) -> NDArray[np.int64]:
        return self.h_rows.indices[self.h_rows.indptr[row]:self.h_rows.indptr[row + 1]]

    def snapshot(self) -> tuple[frozenset[int], int, frozenset[int] | None]:
        g = frozenset(np.flatnonzero(self.in_g).tolist()) if self.record_sets else None
        return frozenset(self.s), int(self.in_g.sum()), g

    def scan(self, phi_denominator: float, eta: float) -> tuple[bool, int | None, list[int]]:
        """One pass of the while-loop body: φ test, heaviest row ℓ and S'_k."""
        g_idx = np.flatnonzero(self.in_g)
        if g_idx.size == 0:
            return True, None, []
        hg = self.h[:, g_idx]
        collisions = (hg.T @ hg).tocsr().getnnz(axis=1)
        phi_ok = bool(collisions.max() * phi_denominator <= eta * g_idx.size)
        row = int(np.argmax(np.asarray(hg.sum(axis=1)).reshape(-1)))
        s_prime = [i for i in sorted(self.s) if row in self.heavy[i]]
        return phi_ok, row, s_prime

    def remove_row(self, row: int) -> None:
        self.in_g[self._row_members(row)] = False

    def remove_colliding(self, col: int) -> None:
        for row in self._heavy_rows(col):
            self.remove_row(int(row))

    def collides(self, i: int, j: int) -> bool:
        return not self.heavy[i].isdisjoint(self.heavy[j])


def _search_pairs(
    pi: SketchMatrix,
    inst: HardInstance,
    eps: float,
    theta: float,
    good_count_threshold: int,
    n_selectors: int,
    phi_denominator: float,
    budget: int,
    eta: float,
    seed: int,
    record_sets: bool,
) -> tuple[list[tuple[int, int]], PairSearchTrace]:
    if pi.cols != inst.n:
        raise DimensionMismatchError(f"Sketch has {pi.cols} columns but the instance lives in dimension {inst.n}.")
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}.")

    good = heavy_profile(pi, theta, eps, good_count_threshold).good_columns
    selectors = [int(c) for c in inst.selectors[:n_selectors] if int(c) in good]
    trace = PairSearchTrace(
        theta=theta,
        good_count_threshold=good_count_threshold,
        phi_bound=eta / phi_denominator if phi_denominator > 0 else math.inf,
        budget=budget,
        selectors=selectors,
    )
    pairs: list[tuple[int, int]] = []
    if not selectors:
        logger.info("No good columns among the selectors; nothing to search.")
        return pairs, trace

    state = _PairSearch(pi, good, selectors, theta, record_sets)
    rng = get_rng(seed)

    def emit(j: int, kind: str, before: tuple, row: int | None = None, pair: tuple[int, int] | None = None) -> None:
        s_before, g_size_before, g_before = before
        s_after, g_size_after, g_after = state.snapshot()
        trace.events.append(TraceEvent(
            k=state.k, j=j, kind=kind, row=row, pair=pair,
            s_before=s_before, s_after=s_after,
            g_size_before=g_size_before, g_size_after=g_size_after,
            g_before=g_before, g_after=g_after,
        ))
        state.k += 1

    for j in range(budget):
        if not state.s:
            emit(j, "exhausted", state.snapshot())
            break

        while True:
            phi_ok, row, s_prime = state.scan(phi_denominator, eta)
            if phi_ok:
                s_prime = []
                break
            if s_prime:
                break
            before = state.snapshot()
            state.remove_row(row)
            emit(j, "row", before, row=row)

        before = state.snapshot()
        if s_prime:
            if len(s_prime) >= 2:
                a, b = (int(i) for i in rng.choice(s_prime, size=2, replace=False))
                pair = (state.c[a], state.c[b])
                pairs.append(pair)
                state.s -= {a, b}
                emit(j, "row_pair", before, row=row, pair=pair)
            else:
                state.s -= set(s_prime)
                state.remove_row(row)
                emit(j, "row_single", before, row=row)
        elif j not in state.s:
            emit(j, "skip", before)
        else:
            partners = [i for i in sorted(state.s) if i != j and state.collides(i, j)]
            if partners:
                jp = int(rng.choice(partners))
                pair = (state.c[jp], state.c[j])
                pairs.append(pair)
                state.s -= {j, jp}
                emit(j, "pair", before, pair=pair)
            else:
                state.s.discard(j)
                state.remove_colliding(state.c[j])
                emit(j, "miss", before)

    logger.info(
        "Pair search emitted %d pairs from %d good selectors in %d events",
        len(pairs), len(selectors), len(trace),
    )

    return pairs, trace


def find_colliding_pairs(
    pi: SketchMatrix,
    inst: HardInstance,
    eps: float,
    eta: float = 3.0,
    seed: int = DEFAULT_SEED,
    record_sets: bool = False,
) -> tuple[list[tuple[int, int]], PairSearchTrace]:
    """Find disjoint pairs of colliding good columns among the selectors of a D_1 instance.

    Heaviness threshold √(8·eps); a column is good with at least 1/(16·eps) heavy entries
    and norm in [1 - eps, 1 + eps]; the for loop runs d/16 times and the while loop stops
    once every collision probability φ is at most eta/d.

    Args:
        pi: sketch.
        inst: instance with r = 1.
        eps: distortion level.
        eta: collision probability scale.
        seed: seed for the pair sampling.
        record_sets: keep the full set G_k in every trace event.

    Returns:
        Emitted pairs (as columns of `pi`) and the trace.
    """
    if inst.r != 1:
        raise NotApplicableError(f"Pair search on D_1 instances needs r = 1, got r = {inst.r}.")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}.")
    return _search_pairs(
        pi, inst, eps,
        theta=math.sqrt(8 * eps),
        good_count_threshold=max(1, math.ceil(1 / (16 * eps) - 1e-9)),
        n_selectors=inst.d,
        phi_denominator=inst.d,
        budget=inst.d // 16,
        eta=eta,
        seed=seed,
        record_sets=record_sets,
    )


def find_colliding_pairs_general(
    pi: SketchMatrix,
    inst: HardInstance,
    eps: float,
    ell: int,
    ell_prime: int,
    eta: float = 3.0,
    seed: int = DEFAULT_SEED,
    abundance: float | None = None,
    record_sets: bool = False,
) -> tuple[list[tuple[int, int]], PairSearchTrace]:
    """Pair search with heaviness √(2^-ell) on a D_{2^-ell_prime} instance.

    With a = eps^δ' (or `abundance`), only the first a·d·2^ell_prime selectors are used,
    a column is good with at least a·2^ell/3 heavy entries, the for loop runs
    a·d·2^ell_prime/16 times and the φ bound is eta/(a·d·2^ell_prime).
    """
    if ell < 0 or ell_prime < 0:
        raise ValueError(f"ell and ell_prime must be non-negative, got {ell} and {ell_prime}.")
    if inst.r != 2 ** ell_prime:
        raise ValueError(f"Instance has r = {inst.r} but ell_prime = {ell_prime} requires r = {2 ** ell_prime}.")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}.")
    a = abundance_scale(eps) if abundance is None else abundance
    if not 0 < a <= 1:
        raise ValueError(f"Abundance factor must lie in (0, 1], got {a}.")

    scale = a * inst.d * inst.r
    return _search_pairs(
        pi, inst, eps,
        theta=math.sqrt(2.0 ** -ell),
        good_count_threshold=max(1, math.ceil(a * 2 ** ell / 3 - 1e-9)),
        n_selectors=math.floor(scale + 1e-9),
        phi_denominator=scale,
        budget=math.floor(scale / 16 + 1e-9),
        eta=eta,
        seed=seed,
        record_sets=record_sets,
    )
