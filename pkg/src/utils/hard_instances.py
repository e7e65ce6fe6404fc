"""Module to sample hard instances: sparse random isometries U = VW."""

import math
from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.utils.general import (
    atomic_write,
    DEFAULT_SEED,
    get_rng,
    InfeasibleInstanceError,
    is_power_of_two,
    power_of_two_reciprocal,
)
from src.utils.sparsemat import SparseVector

FAMILIES = ("d_beta", "mix_s1", "mix_general")


@dataclass(frozen=True, eq=False)
class HardInstance:
    """Sample of a hard distribution encoded by its selectors and signs.

    Column i of the implied n x d matrix U has the entries σ_j/√r at rows C_j for the
    selectors j in block i, i.e. j in [i·r, (i+1)·r).

    Attributes:
        n: ambient dimension.
        d: subspace dimension.
        r: number of nonzeros per column of U (a power of two).
        selectors: the d·r pairwise distinct rows C_j.
        signs: the d·r Rademacher signs σ_j.
    """

    n: int
    d: int
    r: int
    selectors: NDArray[np.int64]
    signs: NDArray[np.int8]

    def __post_init__(self) -> None:
        selectors = np.array(self.selectors, dtype=np.int64).reshape(-1)
        signs = np.array(self.signs, dtype=np.int8).reshape(-1)
        if self.d < 1 or self.n < 1:
            raise ValueError(f"Instance dimensions must be positive, got n={self.n}, d={self.d}.")
        if not is_power_of_two(self.r):
            raise ValueError(f"r must be a power of two, got {self.r}.")
        if self.d * self.r > self.n:
            raise InfeasibleInstanceError(f"d * r = {self.d * self.r} exceeds n = {self.n}.")
        if selectors.size != self.d * self.r or signs.size != self.d * self.r:
            raise ValueError(
                f"Expected {self.d * self.r} selectors and signs, "
                f"got {selectors.size} and {signs.size}.",
            )
        if selectors.min() < 0 or selectors.max() >= self.n:
            raise ValueError(f"Selectors must lie in [0, {self.n}).")
        if np.unique(selectors).size != selectors.size:
            raise ValueError("Selectors must be pairwise distinct.")
        if not np.isin(signs, [-1, 1]).all():
            raise ValueError("Signs must be -1 or +1.")
        selectors.flags.writeable = False
        signs.flags.writeable = False
        object.__setattr__(self, "selectors", selectors)
        object.__setattr__(self, "signs", signs)

    @cached_property
    def _positions(self) -> dict[int, int]:
        return {int(c): j for j, c in enumerate(self.selectors)}

    def selector_position(self, column: int) -> int:
        """Return the j with C_j = `column`."""
        try:
            return self._positions[int(column)]
        except KeyError:
            raise ValueError(f"Column {column} is not a selector of the instance.") from None

    def block_of(self, j: int) -> int:
        """Column of U (equivalently of W) that owns selector j."""
        return j // self.r

    def with_selectors(self, selectors: ArrayLike, n: int) -> "HardInstance":
        """Same signs and blocks, relocated selectors."""
        return HardInstance(n, self.d, self.r, selectors, self.signs)


@dataclass(frozen=True)
class MixtureLabel:
    """Which distribution (and which mixture branch) an instance was drawn from.

    `ell` is None for plain D_β draws, 0 for the D_1 branch of a mixture and log2(r)
    for the sparse branch.
    """

    family: str
    beta: float
    ell: int | None = None


def _draw(
    rng: np.random.Generator,
    n: int,
    d: int,
    r: int,
) -> HardInstance:
    selectors = rng.choice(n, size=d * r, replace=False)
    signs = rng.choice(np.array([-1, 1], dtype=np.int8), size=d * r)
    return HardInstance(n, d, r, selectors, signs)


def _check_feasible(n: int, d: int, r: int) -> None:
    if n < 1 or d < 1:
        raise ValueError(f"Instance dimensions must be positive, got n={n}, d={d}.")
    if d * r > n:
        raise InfeasibleInstanceError(f"d * r = {d * r} exceeds n = {n}.")


class DBeta:
    """Distribution D_β with β = 1/r: every column of U has r entries ±1/√r at distinct rows.

    Attributes:
        n: ambient dimension.
        d: subspace dimension.
        r: nonzeros per column.
    """

    family = "d_beta"

    def __init__(
        self,
        n: int,
        d: int,
        r: int = 1,
    ) -> None:
        """Initialize class.

        Args:
            n: ambient dimension.
            d: subspace dimension.
            r: inverse of β, a power of two.
        """
        if not is_power_of_two(r):
            raise ValueError(f"r must be a power of two, got {r}.")
        _check_feasible(n, d, r)
        self.n, self.d, self.r = n, d, r

    @property
    def r_max(self) -> int:
        return self.r

    @property
    def r_or_family(self) -> str:
        return str(self.r)

    def sample(
        self,
        seed: int = DEFAULT_SEED,
    ) -> tuple[HardInstance, MixtureLabel]:
        """Draw one instance; selectors are uniform without replacement, signs i.i.d. uniform."""
        rng = get_rng(seed)
        return _draw(rng, self.n, self.d, self.r), MixtureLabel(self.family, 1 / self.r)


class MixtureS1:
    """D_1 with probability 1/2 and D_{8·eps} with probability 1/2."""

    family = "mix_s1"

    def __init__(
        self,
        n: int,
        d: int,
        eps: float,
    ) -> None:
        self.r_sparse = power_of_two_reciprocal(8 * eps)
        _check_feasible(n, d, self.r_sparse)
        self.n, self.d, self.eps = n, d, eps

    @property
    def r_max(self) -> int:
        return self.r_sparse

    @property
    def r_or_family(self) -> str:
        return self.family

    def sample(
        self,
        seed: int = DEFAULT_SEED,
    ) -> tuple[HardInstance, MixtureLabel]:
        rng = get_rng(seed)
        if rng.integers(2) == 0:
            r, ell = 1, 0
        else:
            r, ell = self.r_sparse, int(math.log2(self.r_sparse))
        return _draw(rng, self.n, self.d, r), MixtureLabel(self.family, 1 / r, ell)


def ladder_length(eps: float) -> int:
    """L = floor(log2(1/eps)) - 3, the number of sparse branches of the general mixture."""
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}.")
    return math.floor(math.log2(1 / eps) + 1e-9) - 3


class MixtureGeneral:
    """D_1 with probability 1/2, otherwise D_{2^-ℓ} with ℓ uniform on {1, ..., L}."""

    family = "mix_general"

    def __init__(
        self,
        n: int,
        d: int,
        eps: float,
    ) -> None:
        self.L = ladder_length(eps)
        if self.L < 1:
            raise ValueError(f"eps = {eps} leaves no sparse branch (L = {self.L}); eps < 1/16 required.")
        _check_feasible(n, d, 2 ** self.L)
        self.n, self.d, self.eps = n, d, eps

    @property
    def r_max(self) -> int:
        return 2 ** self.L

    @property
    def r_or_family(self) -> str:
        return self.family

    def sample(
        self,
        seed: int = DEFAULT_SEED,
    ) -> tuple[HardInstance, MixtureLabel]:
        rng = get_rng(seed)
        if rng.integers(2) == 0:
            ell = 0
        else:
            ell = int(rng.integers(1, self.L + 1))
        r = 2 ** ell
        return _draw(rng, self.n, self.d, r), MixtureLabel(self.family, 1 / r, ell)


Distribution = DBeta | MixtureS1 | MixtureGeneral


def get_distribution(
    family: str,
    n: int,
    d: int,
    eps: float | None = None,
    r: int = 1,
) -> Distribution:
    """Return hard distribution based on name."""
    match family:
        case "dbeta" | "d_beta":
            return DBeta(n, d, r)
        case "mix_s1" | "mix_general":
            if eps is None:
                raise ValueError(f"Distribution {family} requires eps.")
            return MixtureS1(n, d, eps) if family == "mix_s1" else MixtureGeneral(n, d, eps)
        case _:
            raise ValueError(f"Hard distribution {family} not available.")


def sample_d_beta(n: int, d: int, r: int, seed: int = DEFAULT_SEED) -> HardInstance:
    return DBeta(n, d, r).sample(seed)[0]


def sample_mixture_s1(
    n: int,
    d: int,
    eps: float,
    seed: int = DEFAULT_SEED,
) -> tuple[HardInstance, MixtureLabel]:
    return MixtureS1(n, d, eps).sample(seed)


def sample_mixture_general(
    n: int,
    d: int,
    eps: float,
    seed: int = DEFAULT_SEED,
) -> tuple[HardInstance, MixtureLabel]:
    return MixtureGeneral(n, d, eps).sample(seed)


def materialize_u(inst: HardInstance) -> list[SparseVector]:
    """Return the d sparse columns of U, rows sorted."""
    columns = []
    scale = 1 / np.sqrt(inst.r)
    for i in range(inst.d):
        block = slice(i * inst.r, (i + 1) * inst.r)
        order = np.argsort(inst.selectors[block])
        columns.append(
            SparseVector(inst.selectors[block][order], inst.signs[block][order] * scale),
        )
    return columns


def format_instance(inst: HardInstance, comments: Iterable[str] = ()) -> str:
    """Render an instance in the OSEINST text format."""
    lines = [f"OSEINST {inst.n} {inst.d} {inst.r}", *(f"# {c}" for c in comments)]
    lines.append("C: " + " ".join(str(c) for c in inst.selectors))
    lines.append("S: " + " ".join("+1" if s > 0 else "-1" for s in inst.signs))
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> HardInstance:
    """Parse the OSEINST text format."""
    lines = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if len(lines) != 3:
        raise ValueError(f"OSEINST input must have a header, a C: line and an S: line, got {len(lines)} lines.")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "OSEINST":
        raise ValueError(f"Invalid OSEINST header: {lines[0]!r}.")
    if not lines[1].startswith("C:") or not lines[2].startswith("S:"):
        raise ValueError("OSEINST input must list selectors (C:) before signs (S:).")
    n, d, r = (int(x) for x in header[1:])
    selectors = [int(x) for x in lines[1][2:].split()]
    signs = [int(x) for x in lines[2][2:].split()]
    return HardInstance(n, d, r, selectors, signs)


def write_instance(path: str, inst: HardInstance, comments: Iterable[str] = ()) -> None:
    atomic_write(path, format_instance(inst, comments))


def read_instance(path: str) -> HardInstance:
    with open(path) as f:
        return parse_instance(f.read())
