"""Hadamard-block sketches with m = c·d² rows embed D_1 instances without distortion."""

import logging
import math
from fractions import Fraction

from src.models import HadamardBlock
from src.utils.eval import estimate_failure_prob, FailureEstimate
from src.utils.general import DEFAULT_SEED
from src.utils.hard_instances import DBeta

logger = logging.getLogger(__name__)

DISTORTION_TOL = 1e-9


def hadamard_duplicate_prob(m: int, n: int, d: int) -> float:
    """Exact probability that d distinct uniform columns of the concatenation include two copies.

    Columns c and c' are identical exactly when c ≡ c' (mod m). Drawing d columns with
    pairwise distinct residues amounts to picking d residue classes and one column in
    each, which the elementary symmetric polynomial of the class sizes counts.
    """
    if m < 1 or n < 1 or not 0 <= d <= n:
        raise ValueError(f"Invalid arguments m={m}, n={n}, d={d}.")
    sizes = [n // m + (1 if i < n % m else 0) for i in range(min(m, n))]
    e = [1] + [0] * d
    for size in sizes:
        for k in range(d, 0, -1):
            e[k] += size * e[k - 1]
    return float(1 - Fraction(e[d], math.comb(n, d)))


def demo_hadamard_tightness(
    eps: float,
    d: int,
    delta: float,
    trials: int,
    seed: int = DEFAULT_SEED,
    c: int = 4,
    n: int | None = None,
    n_jobs: int = 1,
) -> FailureEstimate:
    """Estimate the failure probability of the Hadamard-block sketch at distortion 0.

    Args:
        eps: sets the block order 1/(8·eps).
        d: subspace dimension; the sketch has m = c·d² rows.
        delta: failure probability the construction is expected to meet.
        trials: number of D_1 instances.
        seed: master seed.
        c: row constant.
        n: ambient dimension, 4·m when None.
        n_jobs: parallel jobs.

    Returns:
        Failure estimate at distortion level 1e-9.
    """
    m = c * d ** 2
    n = 4 * m if n is None else n
    pi = HadamardBlock(m, n, eps).generate()
    estimate = estimate_failure_prob(pi, DBeta(n, d, 1), DISTORTION_TOL, trials, seed, n_jobs=n_jobs)

    logger.info(
        "Hadamard blocks m=%d n=%d: p_hat=%.4f (exact duplicate probability %.4f, delta %s)",
        m, n, estimate.p_hat, hadamard_duplicate_prob(m, n, d), delta,
    )
    if estimate.wilson_high > delta:
        logger.warning("Wilson upper bound %.4f exceeds delta = %s", estimate.wilson_high, delta)

    return estimate
