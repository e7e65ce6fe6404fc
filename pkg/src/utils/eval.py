"""Evaluation of sketches as subspace embeddings on hard instances."""

import logging
from dataclasses import asdict, dataclass

import numpy as np
from joblib import delayed, Parallel
from numpy.typing import NDArray
from scipy.stats import binomtest
from tqdm import tqdm

from src.models import SketchConstruction
from src.utils.general import (
    check_seed,
    derive_seed,
    DimensionMismatchError,
    NotApplicableError,
)
from src.utils.hard_instances import Distribution, HardInstance, materialize_u
from src.utils.sparsemat import apply_sketch, column_norms, gram_eigen_bounds, SketchMatrix

logger = logging.getLogger(__name__)

CHUNK_SIZE = 256
CSV_COLUMNS = [
    "m", "n", "d", "r_or_family", "eps", "trials", "failures",
    "p_hat", "wilson_low", "wilson_high", "seed",
]


@dataclass(frozen=True)
class DistortionReport:
    """Extreme squared singular values of ΠU and the verdict at distortion level eps.

    Attributes:
        lambda_min: smallest eigenvalue of (ΠU)ᵀ(ΠU).
        lambda_max: largest eigenvalue of (ΠU)ᵀ(ΠU).
        eps_effective: max(1 - √lambda_min, √lambda_max - 1).
        passed: whether every singular value lies in [1 - eps, 1 + eps].
    """

    lambda_min: float
    lambda_max: float
    eps_effective: float
    passed: bool


@dataclass(frozen=True)
class FailureEstimate:
    """Monte Carlo estimate of a failure probability with a 95% Wilson interval."""

    trials: int
    failures: int
    p_hat: float
    wilson_low: float
    wilson_high: float

    def to_record(self, **params: int | float | str) -> dict[str, int | float | str]:
        """Row of the results CSV; `params` supplies m, n, d, r_or_family, eps and seed."""
        record = {**params, **asdict(self)}
        missing = set(CSV_COLUMNS) - set(record)
        if missing:
            raise ValueError(f"Missing CSV fields {sorted(missing)}.")
        return {key: record[key] for key in CSV_COLUMNS}


def failure_record(estimate: FailureEstimate, **params: int | float | str) -> dict[str, int | float | str]:
    return estimate.to_record(**params)


def wilson_interval(failures: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= failures <= trials:
        raise ValueError(f"Invalid counts: {failures} failures out of {trials} trials.")
    ci = binomtest(failures, trials).proportion_ci(confidence_level=0.95, method="wilson")
    p_hat = failures / trials
    return min(max(ci.low, 0.0), p_hat), max(min(ci.high, 1.0), p_hat)


def failure_estimate(failures: int, trials: int) -> FailureEstimate:
    low, high = wilson_interval(failures, trials)
    return FailureEstimate(trials, failures, failures / trials, low, high)


def distortion_report(lambda_min: float, lambda_max: float, eps: float) -> DistortionReport:
    low, high = np.sqrt(lambda_min), np.sqrt(lambda_max)
    return DistortionReport(
        lambda_min=lambda_min,
        lambda_max=lambda_max,
        eps_effective=float(max(1 - low, high - 1)),
        passed=bool(low >= 1 - eps and high <= 1 + eps),
    )


def check_embedding(
    pi: SketchMatrix,
    inst: HardInstance,
    eps: float,
) -> DistortionReport:
    """Check whether `pi` embeds the column space of the instance's U at level `eps`.

    U is an isometry, so the check over every vector of the subspace reduces to the
    extreme eigenvalues of the Gram matrix of ΠU.
    """
    if pi.cols != inst.n:
        raise DimensionMismatchError(f"Sketch has {pi.cols} columns but the instance lives in dimension {inst.n}.")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}.")
    lambda_min, lambda_max = gram_eigen_bounds(apply_sketch(pi, materialize_u(inst)))
    return distortion_report(lambda_min, lambda_max, eps)


def _count_failures(
    pi: SketchMatrix | SketchConstruction,
    dist: Distribution,
    eps: float,
    seed: int,
    trial_ids: range,
) -> int:
    """Count failed trials; trial t draws U from (seed, t, 1) and a fresh Π from (seed, t, 0)."""
    failures = 0
    for t in trial_ids:
        inst, _ = dist.sample(derive_seed(seed, t, 1))
        if isinstance(pi, SketchConstruction):
            sketch = pi.generate_sketch(derive_seed(seed, t, 0), columns=inst.selectors)
        else:
            sketch = pi
        failures += not check_embedding(sketch, inst, eps).passed
    return failures


def estimate_failure_prob(
    pi: SketchMatrix | SketchConstruction,
    dist: Distribution,
    eps: float,
    trials: int,
    seed: int,
    n_jobs: int = 1,
    show_progress: bool = False,
) -> FailureEstimate:
    """Estimate the probability that a sketch fails to embed a random hard instance.

    Args:
        pi: fixed sketch, or a construction to draw a fresh sketch in every trial.
        dist: hard distribution the instances are sampled from.
        eps: distortion level.
        trials: number of trials.
        seed: master seed.
        n_jobs: number of parallel jobs (results do not depend on it).
        show_progress: display a progress bar.

    Returns:
        Failure counts with a 95% Wilson interval.
    """
    if trials < 1:
        raise ValueError(f"At least one trial required, got {trials}.")
    check_seed(seed)
    n = pi.cols if isinstance(pi, SketchMatrix) else pi.n
    if n != dist.n:
        raise DimensionMismatchError(f"Sketch has {n} columns but the distribution has n = {dist.n}.")

    chunks = [range(a, min(a + CHUNK_SIZE, trials)) for a in range(0, trials, CHUNK_SIZE)]
    counts = Parallel(n_jobs=n_jobs)(
        delayed(_count_failures)(pi, dist, eps, seed, chunk)
        for chunk in tqdm(chunks, disable=not show_progress)
    )
    estimate = failure_estimate(int(sum(counts)), trials)

    logger.debug(
        "%d failures in %d trials (p_hat = %.4f)", estimate.failures, trials, estimate.p_hat,
    )

    return estimate


def column_norm_fraction(pi: SketchMatrix, eps: float) -> float:
    """Fraction of columns whose Euclidean norm lies in [1 - eps, 1 + eps]."""
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}.")
    return float((np.abs(column_norms(pi) - 1) <= eps).mean())


def bucket_collision_stats(
    pi: SketchMatrix,
    inst: HardInstance,
    eps: float,
) -> tuple[NDArray[np.int64], bool]:
    """Count, per row of a one-sparse sketch, the selectors landing there through a near-unit entry.

    Returns:
        Per-row counts and whether some row receives more than one selector.
    """
    if pi.max_col_nnz > 1:
        raise NotApplicableError(f"Bucket statistics need column sparsity 1, got {pi.max_col_nnz}.")
    if pi.cols != inst.n:
        raise DimensionMismatchError(f"Sketch has {pi.cols} columns but the instance lives in dimension {inst.n}.")
    sub = pi.matrix[:, inst.selectors]
    near_unit = np.abs(np.abs(sub.data) - 1) <= eps
    counts = np.bincount(sub.indices[near_unit], minlength=pi.rows).astype(np.int64)
    return counts, bool(counts.max(initial=0) > 1)
