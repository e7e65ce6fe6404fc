"""Collision certificates: witness vectors and anti-concentration probabilities."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from src.models.adversary import shared_heavy_rows
from src.utils.general import DEFAULT_SEED, DimensionMismatchError, get_rng
from src.utils.hard_instances import HardInstance
from src.utils.sparsemat import column_inner_product, SketchMatrix, SparseVector

logger = logging.getLogger(__name__)

EXHAUSTIVE_MAX = 20
MC_BUDGET = 100_000
CHUNK = 1 << 15


@dataclass
class CollisionCertificate:
    """A colliding column pair of Π together with its witness vector.

    Attributes:
        col_p: first column of Π (a selector of the instance).
        col_q: second column of Π (a selector of the instance).
        shared_heavy_rows: rows where both columns are θ-heavy.
        inner_product: inner product of the two columns.
        p_prime: column of W owning col_p.
        q_prime: column of W owning col_q.
        witness: unit vector (e_p' + e_q')/√2, or e_p' when both lie in the same column.
        theta: heaviness threshold used for `shared_heavy_rows` (None for shared support).
        anticonc_prob: probability over the signs that ‖ΠUu‖² leaves [(1-eps)², (1+eps)²].
        anticonc_method: `exhaustive` or `monte_carlo`.
        anticonc_stderr: standard error of a Monte Carlo estimate (0 when exhaustive).
    """

    col_p: int
    col_q: int
    shared_heavy_rows: list[int]
    inner_product: float
    p_prime: int
    q_prime: int
    witness: SparseVector
    theta: float | None = None
    anticonc_prob: float | None = None
    anticonc_method: str | None = None
    anticonc_stderr: float | None = None

    @property
    def witness_blocks(self) -> tuple[int, int, bool]:
        return self.p_prime, self.q_prime, self.p_prime == self.q_prime


def build_witness(
    pi: SketchMatrix,
    inst: HardInstance,
    col_p: int,
    col_q: int,
    theta: float | None = None,
) -> CollisionCertificate:
    """Build the certificate of a pair of selector columns.

    Args:
        pi: sketch.
        inst: instance whose selectors include `col_p` and `col_q`.
        col_p: first column of Π.
        col_q: second column of Π.
        theta: heaviness threshold for the shared rows; None records the shared support.

    Returns:
        Certificate without the anti-concentration fields.
    """
    if col_p == col_q:
        raise ValueError(f"A certificate needs two distinct columns, got {col_p} twice.")
    if pi.cols != inst.n:
        raise DimensionMismatchError(f"Sketch has {pi.cols} columns but the instance lives in dimension {inst.n}.")
    p_prime = inst.block_of(inst.selector_position(col_p))
    q_prime = inst.block_of(inst.selector_position(col_q))

    if p_prime == q_prime:
        witness = SparseVector(np.array([p_prime]), np.array([1.0]))
    else:
        witness = SparseVector(np.sort([p_prime, q_prime]), np.full(2, 1 / math.sqrt(2)))

    if theta is None:
        rows = np.intersect1d(pi.column(col_p).indices, pi.column(col_q).indices)
        shared = [int(r) for r in rows]
    else:
        shared = shared_heavy_rows(pi, col_p, col_q, theta)

    return CollisionCertificate(
        col_p=int(col_p),
        col_q=int(col_q),
        shared_heavy_rows=shared,
        inner_product=column_inner_product(pi, col_p, col_q),
        p_prime=p_prime,
        q_prime=q_prime,
        witness=witness,
        theta=theta,
    )


def _sign_quadratic_form(pi: SketchMatrix, inst: HardInstance, cert: CollisionCertificate) -> NDArray[np.float64]:
    """Gram matrix G with ‖ΠUu‖² = σᵀGσ over the signs of the selectors touched by the witness."""
    blocks = sorted({cert.p_prime, cert.q_prime})
    weights = dict(zip(cert.witness.indices.tolist(), cert.witness.values.tolist()))
    columns = []
    for b in blocks:
        for j in range(b * inst.r, (b + 1) * inst.r):
            col = pi.column(int(inst.selectors[j]))
            w = np.zeros(pi.rows)
            w[col.indices] = col.values * weights[b] / math.sqrt(inst.r)
            columns.append(w)
    a = np.column_stack(columns)
    return a.T @ a


def _sign_patterns(k: int, start: int, stop: int) -> NDArray[np.float64]:
    """Sign vectors with σ_0 = +1 and σ_1..σ_{k-1} given by the bits of start..stop-1."""
    idx = np.arange(start, stop, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(k - 1, dtype=np.int64)[None, :]) & 1
    return np.hstack([np.ones((idx.size, 1)), 1.0 - 2.0 * bits])


def _outside(values: NDArray[np.float64], eps: float) -> int:
    return int(((values < (1 - eps) ** 2) | (values > (1 + eps) ** 2)).sum())


def anticoncentration_prob(
    pi: SketchMatrix,
    inst: HardInstance,
    cert: CollisionCertificate,
    eps: float,
    mc_budget: int = MC_BUDGET,
    seed: int = DEFAULT_SEED,
) -> float:
    """Probability over the instance's signs that ‖ΠUu‖² lies outside [(1-eps)², (1+eps)²].

    Only the signs of the selectors owned by the witness blocks matter. Up to 20 of them
    are enumerated exactly (σ and -σ give the same value, so half the patterns suffice);
    beyond that `mc_budget` random patterns are drawn. The method and, for Monte Carlo,
    the standard error are stored on `cert`.
    """
    g = _sign_quadratic_form(pi, inst, cert)
    k = g.shape[0]

    if k <= EXHAUSTIVE_MAX:
        total = 1 << (k - 1)
        outside = 0
        for start in range(0, total, CHUNK):
            sigma = _sign_patterns(k, start, min(start + CHUNK, total))
            outside += _outside(np.einsum("ij,jk,ik->i", sigma, g, sigma), eps)
        prob = outside / total
        cert.anticonc_method, cert.anticonc_stderr = "exhaustive", 0.0
    else:
        if mc_budget < 1:
            raise ValueError(f"Monte Carlo budget must be positive, got {mc_budget}.")
        rng = get_rng(seed)
        outside = 0
        for start in range(0, mc_budget, CHUNK):
            size = min(CHUNK, mc_budget - start)
            sigma = rng.choice(np.array([-1.0, 1.0]), size=(size, k))
            outside += _outside(np.einsum("ij,jk,ik->i", sigma, g, sigma), eps)
        prob = outside / mc_budget
        cert.anticonc_method = "monte_carlo"
        cert.anticonc_stderr = math.sqrt(prob * (1 - prob) / mc_budget)

    logger.debug("Anti-concentration over %d signs: %.6f (%s)", k, prob, cert.anticonc_method)

    cert.anticonc_prob = prob
    return prob


def certificate_to_text(cert: CollisionCertificate, trace_length: int = 0) -> str:
    """Render a certificate as `key: value` lines."""
    def fmt(x: float | None) -> str:
        return "none" if x is None else f"{x:.17g}"

    witness = " ".join(f"{i}:{v:.17g}" for i, v in zip(cert.witness.indices, cert.witness.values))
    lines = [
        f"col_p: {cert.col_p}",
        f"col_q: {cert.col_q}",
        f"shared_heavy_rows: {' '.join(str(r) for r in cert.shared_heavy_rows)}",
        f"inner_product: {cert.inner_product:.17g}",
        f"theta: {fmt(cert.theta)}",
        f"p_prime: {cert.p_prime}",
        f"q_prime: {cert.q_prime}",
        f"equal: {str(cert.p_prime == cert.q_prime).lower()}",
        f"witness: {witness}",
        f"anticonc_prob: {fmt(cert.anticonc_prob)}",
        f"anticonc_method: {cert.anticonc_method or 'none'}",
        f"anticonc_stderr: {fmt(cert.anticonc_stderr)}",
        f"trace_length: {trace_length}",
    ]
    return "\n".join(lines) + "\n"
