"""Heavy-entry audits of a fixed sketch and statistics of the colliding pairs it yields."""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import delayed, Parallel

from src.models.adversary import (
    abundance_scale,
    find_colliding_pairs,
    find_colliding_pairs_general,
    heavy_indicator,
    heavy_profile,
    mean_shared_heavy_rows,
    shared_heavy_rows,
)
from src.utils.general import derive_seed
from src.utils.hard_instances import DBeta, ladder_length
from src.utils.inequalities import KAPPA
from src.utils.sparsemat import column_inner_product, column_norms, SketchMatrix

logger = logging.getLogger(__name__)


@dataclass
class HeavyEntryAudit:
    """Per-ℓ heavy-entry averages of Π' (the columns of norm 1 ± eps) and the norm accounting.

    Attributes:
        table: one row per ℓ with the heaviness threshold, the average count and its cap.
        n_columns: number of columns of Π'.
        empty: whether Π' has no columns.
        mean_sq_norm: average squared column norm of Π'.
        layer_bound: bound on `mean_sq_norm` implied by the measured averages.
        norm_budget: 4·eps^δ'·log2(1/eps) + s·8·eps, the bound when every average meets its cap.
    """

    table: pd.DataFrame
    n_columns: int
    empty: bool
    mean_sq_norm: float
    layer_bound: float
    norm_budget: float

    def summary(self) -> dict:
        return {
            "n_columns": self.n_columns,
            "empty": self.empty,
            "mean_sq_norm": self.mean_sq_norm,
            "layer_bound": self.layer_bound,
            "norm_budget": self.norm_budget,
        }


def heavy_entry_audit(pi: SketchMatrix, eps: float) -> HeavyEntryAudit:
    """Average number of √(2^-ℓ)-heavy entries of Π' for ℓ = 0, ..., L."""
    L = ladder_length(eps)
    if L < 1:
        raise ValueError(f"Heavy-entry audit needs eps < 1/16, got {eps}.")
    a = abundance_scale(eps)
    keep = np.flatnonzero(np.abs(column_norms(pi) - 1) <= eps)
    sub = SketchMatrix(pi.matrix[:, keep], pi.max_col_nnz)

    records = []
    for ell in range(L + 1):
        theta = math.sqrt(2.0 ** -ell)
        average = float(np.diff(heavy_indicator(sub, theta).indptr).mean()) if keep.size else 0.0
        cap = a * 2 ** ell
        records.append({
            "ell": ell, "theta": theta, "average_heavy": average, "cap": cap, "within_cap": average <= cap,
        })
    table = pd.DataFrame(records)

    # Layer ℓ holds entries with 2^-ℓ <= v² < 2^-(ℓ-1); entries of layer 0 are bounded by the norm.
    averages = table["average_heavy"].to_numpy()
    layer_bound = averages[0] * (1 + eps) ** 2
    layer_bound += sum((averages[ell] - averages[ell - 1]) * 2.0 ** (1 - ell) for ell in range(1, L + 1))
    layer_bound += pi.max_col_nnz * 2.0 ** -L

    norms = column_norms(sub) if keep.size else np.zeros(0)
    audit = HeavyEntryAudit(
        table=table,
        n_columns=int(keep.size),
        empty=keep.size == 0,
        mean_sq_norm=float((norms ** 2).mean()) if keep.size else 0.0,
        layer_bound=float(layer_bound),
        norm_budget=4 * a * math.log2(1 / eps) + pi.max_col_nnz * 8 * eps,
    )
    if audit.empty:
        logger.warning("No column has norm within 1 ± %s; the audit table is all zeros", eps)

    return audit


@dataclass
class CollisionStats:
    """Outcome of the pair search over several instances of one sketch.

    Attributes:
        runs: per-run table (seed, pairs, best inner product, success, trace length).
        success_threshold: inner product that counts as large.
        success_fraction: fraction of runs with some emitted pair above the threshold.
        mean_pairs: average number of emitted pairs per run.
        delta_hat: mean shared heavy rows over all colliding pairs of good columns.
        delta_hat_emitted: mean shared heavy rows over the emitted pairs.
        p_hat_colliding: fraction of colliding good pairs above the threshold.
    """

    runs: pd.DataFrame
    success_threshold: float
    success_fraction: float
    mean_pairs: float
    delta_hat: float
    delta_hat_emitted: float
    p_hat_colliding: float

    def summary(self) -> dict:
        return {
            "success_threshold": self.success_threshold,
            "success_fraction": self.success_fraction,
            "mean_pairs": self.mean_pairs,
            "delta_hat": self.delta_hat,
            "delta_hat_emitted": self.delta_hat_emitted,
            "p_hat_colliding": self.p_hat_colliding,
        }


def _colliding_fraction_above(pi: SketchMatrix, theta: float, columns: np.ndarray, threshold: float) -> float:
    h = heavy_indicator(pi, theta)[:, columns]
    rows, cols = (h.T @ h).nonzero()
    if rows.size == 0:
        return float("nan")
    sub = pi.matrix[:, columns]
    gram = np.asarray((sub.T @ sub).tocsr()[rows, cols]).reshape(-1)
    return float(np.mean(gram >= threshold))


def run(
    pi: SketchMatrix,
    inst_seed: int,
    search_seed: int,
    eps: float,
    d: int,
    ell: int | None,
    ell_prime: int,
    eta: float,
    abundance: float | None,
) -> tuple[dict, list[tuple[int, int]], list[int]]:
    """Sample one instance and run the pair search on it with independent coins."""
    r = 1 if ell is None else 2 ** ell_prime
    inst, _ = DBeta(pi.cols, d, r).sample(inst_seed)
    if ell is None:
        pairs, trace = find_colliding_pairs(pi, inst, eps, eta, search_seed)
    else:
        pairs, trace = find_colliding_pairs_general(pi, inst, eps, ell, ell_prime, eta, search_seed, abundance)
    ips = [column_inner_product(pi, a, b) for a, b in pairs]
    shared = [len(shared_heavy_rows(pi, a, b, trace.theta)) for a, b in pairs]
    record = {
        "pairs": len(pairs),
        "best_inner_product": max(ips) if ips else float("nan"),
        "events": len(trace),
    }
    return record, pairs, shared


def collision_pair_stats(
    pi: SketchMatrix,
    inst_seeds: list[int],
    eps: float,
    d: int,
    ell: int | None = None,
    ell_prime: int = 0,
    eta: float = 3.0,
    kappa: float = KAPPA,
    abundance: float | None = None,
    n_jobs: int = 1,
) -> CollisionStats:
    """Run the pair search on one instance per seed and summarize the pairs found.

    Without `ell` the D_1 search is used and a pair is large when its inner product is at
    least (8 - kappa)·eps; with `ell` the general search is used on D_{2^-ell_prime}
    instances and the threshold is 2^-ell - kappa·eps.
    """
    if ell is None:
        theta, threshold = math.sqrt(8 * eps), (8 - kappa) * eps
        good_count = max(1, math.ceil(1 / (16 * eps) - 1e-9))
    else:
        theta, threshold = math.sqrt(2.0 ** -ell), 2.0 ** -ell - kappa * eps
        a = abundance_scale(eps) if abundance is None else abundance
        good_count = max(1, math.ceil(a * 2 ** ell / 3 - 1e-9))

    results = Parallel(n_jobs=n_jobs)(
        delayed(run)(pi, derive_seed(seed, 1), derive_seed(seed, 2), eps, d, ell, ell_prime, eta, abundance)
        for seed in inst_seeds
    )
    runs = pd.DataFrame(
        [{"seed": seed, **record} for seed, (record, _, _) in zip(inst_seeds, results)],
        columns=["seed", "pairs", "best_inner_product", "events"],
    )
    runs["success"] = runs["best_inner_product"] >= threshold
    shared = [x for _, _, rows in results for x in rows]

    good = np.array(sorted(heavy_profile(pi, theta, eps, good_count).good_columns), dtype=np.int64)
    stats = CollisionStats(
        runs=runs,
        success_threshold=threshold,
        success_fraction=float(runs["success"].mean()) if len(runs) else float("nan"),
        mean_pairs=float(runs["pairs"].mean()) if len(runs) else float("nan"),
        delta_hat=mean_shared_heavy_rows(pi, theta, good) if good.size else float("nan"),
        delta_hat_emitted=float(np.mean(shared)) if shared else float("nan"),
        p_hat_colliding=_colliding_fraction_above(pi, theta, good, threshold) if good.size else float("nan"),
    )

    logger.info(
        "%d runs: %.3f pairs per run, success fraction %.3f",
        len(runs), stats.mean_pairs, stats.success_fraction,
    )

    return stats
