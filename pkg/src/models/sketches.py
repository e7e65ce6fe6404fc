"""Random and deterministic sketching matrix constructions."""

from abc import ABC, abstractmethod
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import hadamard

from src.utils.general import DEFAULT_SEED, get_rng, is_power_of_two
from src.utils.sparsemat import DenseMatrix, SketchMatrix

SIGNS = np.array([-1.0, 1.0])

Column = tuple[NDArray[np.int64], NDArray[np.float64]]


class SketchConstruction(ABC):
    """Sketch Construction Abstract Base Class.

    Every column is drawn from its own random stream, derived from the seed and the
    column index, so any subset of columns can be generated on its own and agrees
    with the corresponding columns of the full matrix.
    """

    kind: str

    def __init__(
        self,
        m: int,
        n: int,
    ) -> None:
        """Initialize construction with target dimension `m` and ambient dimension `n`."""
        if m < 1 or n < 1:
            raise ValueError(f"Sketch dimensions must be positive, got m={m}, n={n}.")
        self.m = int(m)
        self.n = int(n)

    @property
    @abstractmethod
    def s(self) -> int:
        """Column sparsity."""

    @abstractmethod
    def _column(
        self,
        c: int,
        seed: int,
    ) -> Column:
        """Return the sorted row indices and the values of column `c`."""

    def _columns(self, columns: ArrayLike | None) -> NDArray[np.int64]:
        if columns is None:
            return np.arange(self.n)
        columns = np.unique(np.asarray(columns, dtype=np.int64))
        if columns.size and (columns[0] < 0 or columns[-1] >= self.n):
            raise IndexError(f"Requested columns outside [0, {self.n}).")
        return columns

    def generate(
        self,
        seed: int = DEFAULT_SEED,
        columns: ArrayLike | None = None,
    ) -> SketchMatrix | DenseMatrix:
        """Generate the sketch.

        Args:
            seed: master seed.
            columns: if given, only these columns are drawn and all other columns are empty.

        Returns:
            Sketch of shape (m, n).
        """
        columns = self._columns(columns)
        drawn = [self._column(int(c), seed) for c in columns]

        counts = np.zeros(self.n, dtype=np.int64)
        counts[columns] = [rows.size for rows, _ in drawn]
        matrix = sp.csc_matrix(
            (
                np.concatenate([v for _, v in drawn]) if drawn else np.empty(0),
                np.concatenate([r for r, _ in drawn]) if drawn else np.empty(0, dtype=np.int64),
                np.concatenate([[0], np.cumsum(counts)]),
            ),
            shape=(self.m, self.n),
        )
        return SketchMatrix(matrix, self.s)

    def generate_sketch(
        self,
        seed: int = DEFAULT_SEED,
        columns: ArrayLike | None = None,
    ) -> SketchMatrix:
        """Generate the sketch in sparse form, whatever its natural representation."""
        pi = self.generate(seed, columns)
        if isinstance(pi, SketchMatrix):
            return pi
        return SketchMatrix(pi, self.s)


class CountSketch(SketchConstruction):
    """Count-Sketch: a single random sign at a uniformly random row of every column."""

    kind = "countsketch"

    @property
    def s(self) -> int:
        return 1

    def _column(self, c: int, seed: int) -> Column:
        rng = get_rng(seed, c)
        row = rng.integers(self.m)
        sign = rng.choice(SIGNS)
        return np.array([row], dtype=np.int64), np.array([sign])


class OSNAP(SketchConstruction):
    """OSNAP with uniformly placed positions.

    Each column holds `s` entries of value ±1/√s at distinct rows drawn uniformly
    without replacement.
    """

    kind = "osnap"

    def __init__(
        self,
        m: int,
        n: int,
        s: int,
    ) -> None:
        super().__init__(m, n)
        if not 1 <= s <= m:
            raise ValueError(f"OSNAP sparsity must satisfy 1 <= s <= m, got s={s}, m={m}.")
        self._s = int(s)

    @property
    def s(self) -> int:
        return self._s

    def _column(self, c: int, seed: int) -> Column:
        rng = get_rng(seed, c)
        rows = np.sort(rng.choice(self.m, size=self._s, replace=False)).astype(np.int64)
        values = rng.choice(SIGNS, size=self._s) / np.sqrt(self._s)
        return rows, values


class GaussianSketch(SketchConstruction):
    """Dense Gaussian sketch with i.i.d. N(0, 1/m) entries."""

    kind = "gaussian"

    @property
    def s(self) -> int:
        return self.m

    def _column(self, c: int, seed: int) -> Column:
        values = get_rng(seed, c).normal(0.0, 1.0 / np.sqrt(self.m), size=self.m)
        return np.arange(self.m, dtype=np.int64), values

    def generate(
        self,
        seed: int = DEFAULT_SEED,
        columns: ArrayLike | None = None,
    ) -> DenseMatrix:
        """Generate the dense m x n Gaussian matrix (columns not requested are zero)."""
        a = np.zeros((self.m, self.n))
        for c in self._columns(columns):
            _, a[:, c] = self._column(int(c), seed)
        return a


class HadamardBlock(SketchConstruction):
    """Horizontal concatenation of copies of a block-diagonal matrix of scaled Hadamard blocks.

    With b = 1/(8·eps), every diagonal block of the m x m matrix is H_b / √b, so each
    column carries b entries of absolute value √(8·eps) and has unit norm. Columns
    c and c + m are identical copies. The construction is deterministic and ignores
    the seed.
    """

    kind = "hadamard_block"

    def __init__(
        self,
        m: int,
        n: int,
        eps: float,
    ) -> None:
        super().__init__(m, n)
        if not 0 < eps <= 1 / 8:
            raise ValueError(f"eps must lie in (0, 1/8] for a Hadamard block, got {eps}.")
        b = round(1 / (8 * eps))
        if abs(8 * eps * b - 1) > 1e-9 or not is_power_of_two(b):
            raise ValueError(f"1/(8*eps) = {1 / (8 * eps)} is not a power of two.")
        if m % b != 0:
            raise ValueError(f"Block order {b} does not divide m={m}.")
        self.eps = eps
        self.b = b

    @property
    def s(self) -> int:
        return self.b

    @cached_property
    def block(self) -> NDArray[np.float64]:
        """Scaled Hadamard block H_b / √b (Sylvester construction)."""
        return hadamard(self.b).astype(np.float64) / np.sqrt(self.b)

    def _column(self, c: int, seed: int) -> Column:
        local = c % self.m
        first = local // self.b * self.b
        return np.arange(first, first + self.b, dtype=np.int64), self.block[:, local % self.b]


def gen_countsketch(m: int, n: int, seed: int = DEFAULT_SEED) -> SketchMatrix:
    return CountSketch(m, n).generate(seed)


def gen_osnap(m: int, n: int, s: int, seed: int = DEFAULT_SEED) -> SketchMatrix:
    return OSNAP(m, n, s).generate(seed)


def gen_gaussian(m: int, n: int, seed: int = DEFAULT_SEED) -> DenseMatrix:
    return GaussianSketch(m, n).generate(seed)


def gen_hadamard_block(eps: float, m: int, n: int) -> SketchMatrix:
    return HadamardBlock(m, n, eps).generate()
