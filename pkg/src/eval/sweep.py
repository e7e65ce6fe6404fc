"""Empirical row thresholds m* of random sketches and their scaling in d, eps and delta."""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import linregress
from tqdm import tqdm

from src.utils.construction import make_construction
from src.utils.eval import estimate_failure_prob
from src.utils.general import check_seed, DEFAULT_SEED, derive_seed, InfeasibleInstanceError
from src.utils.hard_instances import get_distribution

logger = logging.getLogger(__name__)

N_MAX = 10 ** 7
MIN_FIT_POINTS = 3

# Axis name -> (config attribute, exponent the lower bound predicts).
AXES = {"d": ("d_list", 2.0), "eps": ("eps_list", -2.0), "delta": ("delta_list", -1.0)}


def birthday_collision_prob(m: int, k: int) -> float:
    """Probability that k items hashed uniformly into m buckets produce a collision."""
    if m < 1 or k < 0:
        raise ValueError(f"Invalid arguments m={m}, k={k}.")
    no_collision = 1.0
    for i in range(k):
        no_collision *= max(0.0, 1 - i / m)
    return 1 - no_collision


def geometric_grid(m_lo: int, m_hi: int, factor: float) -> list[int]:
    """Strictly increasing integers m_lo·factor^k (rounded up) not exceeding m_hi."""
    if m_lo < 1 or m_hi < m_lo:
        raise ValueError(f"Invalid grid bounds [{m_lo}, {m_hi}].")
    if factor <= 1:
        raise ValueError(f"Grid factor must exceed 1, got {factor}.")
    grid = []
    x = float(m_lo)
    while x <= m_hi * (1 + 1e-12):
        m = min(math.ceil(x - 1e-9), m_hi)
        if not grid or m > grid[-1]:
            grid.append(m)
        x *= factor
    return grid


def auto_n(d: int, eps: float, delta: float) -> int:
    """n = ⌈8·d²·max(1, 1/(eps²·delta))⌉."""
    return math.ceil(8 * d ** 2 * max(1.0, 1 / (eps ** 2 * delta)) - 1e-9)


@dataclass(frozen=True)
class SweepConfig:
    """Threshold sweep configuration.

    Attributes:
        d_list: subspace dimensions.
        eps: distortion level (used when `eps_list` is empty).
        delta: target failure probability (used when `delta_list` is empty).
        s: column sparsity (OSNAP only).
        m_grid: explicit strictly increasing grid of row counts.
        m_lo: smallest m of the geometric grid (when `m_grid` is empty).
        m_hi: largest m of the geometric grid.
        factor: ratio of the geometric grid.
        trials_per_point: Monte Carlo trials per (d, eps, delta, m).
        distribution: hard distribution family.
        r: nonzeros per column of U for the `d_beta` family.
        kind: sketch construction.
        seed: master seed.
        eps_list: distortion levels to sweep.
        delta_list: failure probabilities to sweep.
        n: ambient dimension; derived from d, eps and delta when None.
        n_max: memory guard on n.
        force_large_n: lift the memory guard.
        n_jobs: parallel jobs per point.
    """

    d_list: tuple[int, ...]
    eps: float
    delta: float
    s: int = 1
    m_grid: tuple[int, ...] = ()
    m_lo: int = 2
    m_hi: int = 1024
    factor: float = 1.3
    trials_per_point: int = 1000
    distribution: str = "d_beta"
    r: int = 1
    kind: str = "countsketch"
    seed: int = DEFAULT_SEED
    eps_list: tuple[float, ...] = ()
    delta_list: tuple[float, ...] = ()
    n: int | None = None
    n_max: int = N_MAX
    force_large_n: bool = False
    n_jobs: int = 1

    def __post_init__(self) -> None:
        check_seed(self.seed)
        if not self.d_list or min(self.d_list) < 1:
            raise ValueError(f"d_list must hold positive dimensions, got {self.d_list}.")
        if self.trials_per_point < 100:
            raise ValueError(f"At least 100 trials per point required, got {self.trials_per_point}.")
        grid = self.grid()
        if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ValueError(f"m grid must be strictly increasing and positive, got {grid}.")
        for eps in self.eps_values():
            if not 0 < eps < 1:
                raise ValueError(f"eps must lie in (0, 1), got {eps}.")
        for delta in self.delta_values():
            if not 0 < delta < 1:
                raise ValueError(f"delta must lie in (0, 1), got {delta}.")

    def grid(self) -> list[int]:
        if self.m_grid:
            return list(self.m_grid)
        return geometric_grid(self.m_lo, self.m_hi, self.factor)

    def eps_values(self) -> list[float]:
        return list(self.eps_list) or [self.eps]

    def delta_values(self) -> list[float]:
        return list(self.delta_list) or [self.delta]

    def resolve_n(self, d: int, eps: float, delta: float) -> int:
        n = self.n if self.n is not None else auto_n(d, eps, delta)
        if n > self.n_max and not self.force_large_n:
            raise InfeasibleInstanceError(
                f"n = {n} exceeds the memory guard of {self.n_max} columns; force it to proceed.",
            )
        return n


@dataclass(frozen=True)
class SweepFit:
    """Least-squares fit of log m* against the log of one parameter."""

    exponent: float
    intercept: float
    r_squared: float
    points: int


@dataclass
class SweepResult:
    """Failure estimates per grid point, thresholds and scaling fits."""

    rows: pd.DataFrame
    m_star: dict[tuple[int, float, float], int | None]
    fits: dict[str, SweepFit | None] = field(default_factory=dict)

    def summary(self, config: SweepConfig) -> dict:
        """JSON-ready summary with the resolved configuration."""
        return {
            "m_star": {
                f"d={d},eps={eps!r},delta={delta!r}": m for (d, eps, delta), m in self.m_star.items()
            },
            "fit": {axis: None if fit is None else asdict(fit) for axis, fit in self.fits.items()},
            "predicted_exponents": {axis: exponent for axis, (_, exponent) in AXES.items()},
            "config": {**asdict(config), "grid": config.grid()},
        }


def run(
    cfg: SweepConfig,
    d: int,
    eps: float,
    delta: float,
    key: tuple[int, int, int],
    show_progress: bool = False,
) -> tuple[list[dict], int | None]:
    """Estimate failure probabilities over the m grid for one (d, eps, delta)."""
    n = cfg.resolve_n(d, eps, delta)
    dist = get_distribution(cfg.distribution, n, d, eps=eps, r=cfg.r)
    rows, m_star = [], None
    for m in cfg.grid():
        construction = make_construction(cfg.kind, m, n, cfg.s, eps)
        point_seed = derive_seed(cfg.seed, *key, m)
        estimate = estimate_failure_prob(
            construction, dist, eps, cfg.trials_per_point, point_seed, n_jobs=cfg.n_jobs,
        )
        record = estimate.to_record(
            m=m, n=n, d=d, r_or_family=dist.r_or_family, eps=eps, seed=cfg.seed,
        )
        record["delta"] = delta
        rows.append(record)
        if m_star is None and estimate.wilson_high <= delta:
            m_star = m
        if show_progress:
            tqdm.write(f"d={d} eps={eps} delta={delta} m={m}: p_hat={estimate.p_hat:.4f}")

    if m_star is None:
        logger.warning("No grid point reached failure probability %s for d=%d, eps=%s", delta, d, eps)
    else:
        logger.info("m* = %d for d=%d, eps=%s, delta=%s", m_star, d, eps, delta)

    return rows, m_star


def fit_axis(
    m_star: dict[tuple[int, float, float], int | None],
    cfg: SweepConfig,
    axis: str,
) -> SweepFit | None:
    """Fit log m* against log of one parameter, the other two held at their first values."""
    d0, eps0, delta0 = cfg.d_list[0], cfg.eps_values()[0], cfg.delta_values()[0]
    points = []
    for (d, eps, delta), m in m_star.items():
        if m is None:
            continue
        x = {"d": d, "eps": eps, "delta": delta}[axis]
        fixed = {"d": d == d0, "eps": eps == eps0, "delta": delta == delta0}
        if all(ok for name, ok in fixed.items() if name != axis):
            points.append((x, m))
    if len({x for x, _ in points}) < MIN_FIT_POINTS:
        return None
    x, y = np.log([p[0] for p in points]), np.log([p[1] for p in points])
    fit = linregress(x, y)
    return SweepFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2), len(points))


def threshold_sweep(cfg: SweepConfig, show_progress: bool = False) -> SweepResult:
    """Sweep the m grid for every (d, eps, delta) and fit the scaling of m*."""
    rows, m_star = [], {}
    combos = [
        ((di, ei, li), d, eps, delta)
        for di, d in enumerate(cfg.d_list)
        for ei, eps in enumerate(cfg.eps_values())
        for li, delta in enumerate(cfg.delta_values())
    ]
    for key, d, eps, delta in tqdm(combos, disable=not show_progress):
        point_rows, m_star[(d, eps, delta)] = run(cfg, d, eps, delta, key, show_progress)
        rows += point_rows

    fits = {axis: fit_axis(m_star, cfg, axis) for axis in AXES}
    return SweepResult(rows=pd.DataFrame(rows), m_star=m_star, fits=fits)
