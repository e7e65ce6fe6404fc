"""Finite checks of the probabilistic inequalities behind the collision arguments."""

from fractions import Fraction
from itertools import product

import numpy as np
from numpy.typing import ArrayLike

from src.models.adversary import HEAVY_RTOL
from src.utils.sparsemat import column_norms, SketchMatrix

KAPPA = 3.0


def verify_small_inner_product(
    vectors: ArrayLike,
    eps: float,
    kappa: float = KAPPA,
) -> float:
    """Fraction of ordered pairs (u, v), u = v included, with ⟨u, v⟩ >= -kappa·eps.

    For vectors in the unit ball and eps < 1/9 this fraction exceeds 2·eps.

    Args:
        vectors: array of shape (k, dim), one vector per row.
        eps: level in (0, 1/9).
        kappa: slack factor.

    Returns:
        The fraction over all k² ordered pairs.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vectors.shape[0] == 0:
        raise ValueError("At least one vector required.")
    if not 0 < eps < 1 / 9:
        raise ValueError(f"eps must lie in (0, 1/9), got {eps}.")
    norms = np.linalg.norm(vectors, axis=1)
    if (norms > 1 + 1e-12).any():
        raise ValueError(f"Vectors must lie in the unit ball, got norm {norms.max()}.")
    gram = vectors @ vectors.T
    return float((gram >= -kappa * eps).mean())


def rademacher_fact_check(
    x1: float,
    x2: float,
    x3: float,
    a: float,
) -> tuple[float, float]:
    """Exact probabilities that σ1·x1 + σ2·x2 + σ1σ2·x3 is >= a and <= -a.

    Requires |x1| >= |x2| >= |x3| and |x1| >= a >= 0. The four sign patterns are
    evaluated in exact rational arithmetic.
    """
    x1, x2, x3, a = (Fraction(x) for x in (x1, x2, x3, a))
    if not abs(x1) >= abs(x2) >= abs(x3):
        raise ValueError(f"Need |x1| >= |x2| >= |x3|, got {float(x1)}, {float(x2)}, {float(x3)}.")
    if not abs(x1) >= a >= 0:
        raise ValueError(f"Need |x1| >= a >= 0, got |x1| = {float(abs(x1))}, a = {float(a)}.")

    values = [s1 * x1 + s2 * x2 + s1 * s2 * x3 for s1, s2 in product((1, -1), repeat=2)]
    p_up = Fraction(sum(v >= a for v in values), 4)
    p_down = Fraction(sum(v <= -a for v in values), 4)
    return float(p_up), float(p_down)


def large_inner_product_fraction(
    pi: SketchMatrix,
    row: int,
    theta: float,
    eps: float,
    kappa: float = KAPPA,
) -> float:
    """Fraction of ordered pairs of columns heavy in `row` with inner product >= θ² - kappa·eps.

    If every such column has squared norm at most 1 + θ² and eps < 1/9, the fraction is
    at least eps/2. Returns nan when no column is heavy in `row`.
    """
    if not 0 <= row < pi.rows:
        raise IndexError(f"Row {row} out of range for a matrix with {pi.rows} rows.")
    entries = pi.matrix.getrow(row)
    heavy = entries.indices[np.abs(entries.data) >= theta * (1 - HEAVY_RTOL)]
    if heavy.size == 0:
        return float("nan")
    sub = pi.matrix[:, np.sort(heavy)]
    gram = (sub.T @ sub).toarray()
    return float((gram >= theta ** 2 - kappa * eps).mean())


def norm_bound_holds(pi: SketchMatrix, row: int, theta: float) -> bool:
    """Whether every column heavy in `row` has squared norm at most 1 + θ²."""
    entries = pi.matrix.getrow(row)
    heavy = entries.indices[np.abs(entries.data) >= theta * (1 - HEAVY_RTOL)]
    return bool((column_norms(pi)[heavy] ** 2 <= 1 + theta ** 2).all())
