"""Sparse sketching matrices, sparse vectors and the exact Gram eigenvalue oracle."""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray
from scipy.sparse.linalg import norm as sparse_norm

from src.utils.general import atomic_write, DimensionMismatchError, NumericInputError

# Optional Numba for the Jacobi sweeps; the plain Python kernel is used otherwise.
NUMBA_AVAILABLE = False
try:
    from numba import njit
    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

DenseMatrix = NDArray[np.float64]

MAX_GRAM_DIM = 512
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 64


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Sparse real vector stored as strictly increasing indices and matching values."""

    indices: NDArray[np.int64]
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        indices = np.array(self.indices, dtype=np.int64).reshape(-1)
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if indices.shape != values.shape:
            raise DimensionMismatchError(
                f"Got {indices.size} indices but {values.size} values.",
            )
        if indices.size > 1 and not (np.diff(indices) > 0).all():
            raise ValueError("Indices of a sparse vector must be strictly increasing.")
        if not np.isfinite(values).all():
            raise NumericInputError("Sparse vector contains non-finite values.")
        indices.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        """Build from (index, value) pairs in any order."""
        pairs = sorted(pairs)
        if not pairs:
            return cls(np.empty(0, dtype=np.int64), np.empty(0))
        indices, values = zip(*pairs)
        return cls(np.array(indices), np.array(values))

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def to_dense(self, size: int) -> NDArray[np.float64]:
        if self.nnz and self.indices[-1] >= size:
            raise DimensionMismatchError(f"Index {self.indices[-1]} out of range for size {size}.")
        x = np.zeros(size)
        x[self.indices] = self.values
        return x


class SketchMatrix:
    """Column-sparse m x n real matrix with a declared maximum column sparsity.

    The matrix is held as a `scipy.sparse.csc_matrix` in canonical format: row indices
    strictly increasing within every column, no explicit zeros, all values finite.

    Attributes:
        matrix: underlying CSC matrix, treated as immutable.
        max_col_nnz: declared column sparsity s.
    """

    def __init__(
        self,
        matrix: sp.spmatrix | ArrayLike,
        max_col_nnz: int | None = None,
    ) -> None:
        """Initialize class.

        Args:
            matrix: sparse or dense m x n matrix.
            max_col_nnz: declared column sparsity; defaults to the largest column count.
        """
        csc = sp.csc_matrix(matrix, dtype=np.float64, copy=True)
        if not np.isfinite(csc.data).all():
            raise NumericInputError("Sketch matrix contains non-finite values.")
        csc.sum_duplicates()
        csc.eliminate_zeros()
        csc.sort_indices()

        counts = np.diff(csc.indptr)
        if max_col_nnz is None:
            max_col_nnz = int(counts.max(initial=0))
        if max_col_nnz < 0:
            raise ValueError(f"Column sparsity must be non-negative, got {max_col_nnz}.")
        if counts.size and counts.max() > max_col_nnz:
            col = int(np.argmax(counts))
            raise ValueError(
                f"Column {col} has {counts[col]} nonzeros, more than the declared "
                f"sparsity {max_col_nnz}.",
            )

        self.matrix = csc
        self.max_col_nnz = int(max_col_nnz)

    @classmethod
    def from_columns(
        cls,
        columns: Sequence[SparseVector | None],
        rows: int,
        max_col_nnz: int | None = None,
    ) -> "SketchMatrix":
        """Build from a list of sparse columns (`None` for an empty column)."""
        indptr = [0]
        indices, data = [], []
        for j, col in enumerate(columns):
            if col is not None and col.nnz:
                if col.indices[0] < 0 or col.indices[-1] >= rows:
                    raise DimensionMismatchError(f"Column {j} has a row index outside [0, {rows}).")
                indices.append(col.indices)
                data.append(col.values)
                indptr.append(indptr[-1] + col.nnz)
            else:
                indptr.append(indptr[-1])
        matrix = sp.csc_matrix(
            (
                np.concatenate(data) if data else np.empty(0),
                np.concatenate(indices) if indices else np.empty(0, dtype=np.int64),
                np.array(indptr),
            ),
            shape=(rows, len(columns)),
        )
        return cls(matrix, max_col_nnz)

    @classmethod
    def from_dense(cls, a: ArrayLike, max_col_nnz: int | None = None) -> "SketchMatrix":
        return cls(np.asarray(a, dtype=np.float64), max_col_nnz)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    def nnz_per_column(self) -> NDArray[np.int64]:
        return np.diff(self.matrix.indptr)

    def _check_col(self, j: int) -> int:
        if not 0 <= j < self.cols:
            raise IndexError(f"Column {j} out of range for a matrix with {self.cols} columns.")
        return int(j)

    def column(self, j: int) -> SparseVector:
        """Return column `j` as a sparse vector."""
        j = self._check_col(j)
        start, end = self.matrix.indptr[j], self.matrix.indptr[j + 1]
        return SparseVector(self.matrix.indices[start:end], self.matrix.data[start:end])

    def toarray(self) -> DenseMatrix:
        return self.matrix.toarray()

    def scaled(self, c: float) -> "SketchMatrix":
        """Return `c` times this matrix (the zero matrix keeps all columns empty)."""
        return SketchMatrix(self.matrix * c, self.max_col_nnz)


def apply_sketch(
    pi: SketchMatrix,
    u_cols: Sequence[SparseVector],
) -> DenseMatrix:
    """Materialize the product of `pi` with the matrix whose columns are `u_cols`.

    Args:
        pi: m x n sketch.
        u_cols: sparse columns with indices in [0, n).

    Returns:
        Dense m x len(u_cols) matrix.
    """
    indptr = np.zeros(len(u_cols) + 1, dtype=np.int64)
    for j, col in enumerate(u_cols):
        if col.nnz and (col.indices[0] < 0 or col.indices[-1] >= pi.cols):
            raise DimensionMismatchError(
                f"Column {j} has an index outside [0, {pi.cols}) of the sketch.",
            )
        indptr[j + 1] = indptr[j] + col.nnz
    indices = np.concatenate([col.indices for col in u_cols]) if u_cols else np.empty(0, dtype=np.int64)
    values = np.concatenate([col.values for col in u_cols]) if u_cols else np.empty(0)
    u = sp.csc_matrix((values, indices, indptr), shape=(pi.cols, len(u_cols)))
    return np.asarray((pi.matrix @ u).toarray(), dtype=np.float64)


def _jacobi_eigenvalues(g: NDArray[np.float64], tol: float, max_sweeps: int) -> NDArray[np.float64]:
    """Cyclic Jacobi rotations on a symmetric matrix, in place; returns the diagonal."""
    n = g.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += g[i, j] * g[i, j]
    scale = np.sqrt(scale)

    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += g[i, j] * g[i, j]
        if np.sqrt(2.0 * off) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = g[p, q]
                if apq == 0.0:
                    continue
                app = g[p, p]
                aqq = g[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                elif tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    if k != p and k != q:
                        akp = g[k, p]
                        akq = g[k, q]
                        g[k, p] = c * akp - s * akq
                        g[p, k] = g[k, p]
                        g[k, q] = s * akp + c * akq
                        g[q, k] = g[k, q]
                g[p, p] = app - t * apq
                g[q, q] = aqq + t * apq
                g[p, q] = 0.0
                g[q, p] = 0.0

    w = np.empty(n)
    for i in range(n):
        w[i] = g[i, i]
    return w


if NUMBA_AVAILABLE:
    _jacobi_kernel = njit(cache=True)(_jacobi_eigenvalues)
else:
    _jacobi_kernel = _jacobi_eigenvalues


def gram_eigen_bounds(a: ArrayLike) -> tuple[float, float]:
    """Return the smallest and largest eigenvalues of the Gram matrix of `a`.

    Args:
        a: dense matrix with between 1 and 512 columns.

    Returns:
        Tuple `(lambda_min, lambda_max)`; tiny negative roundoff is clamped to zero.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatchError(f"Expected a 2-dimensional matrix, got {a.ndim} dimensions.")
    if not 1 <= a.shape[1] <= MAX_GRAM_DIM:
        raise DimensionMismatchError(
            f"Number of columns must be between 1 and {MAX_GRAM_DIM}, got {a.shape[1]}.",
        )
    if not np.isfinite(a).all():
        raise NumericInputError("Matrix contains non-finite entries.")

    g = np.ascontiguousarray(a.T @ a)
    g = 0.5 * (g + g.T)
    w = _jacobi_kernel(g, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    w = np.maximum(w, 0.0)
    lambda_min, lambda_max = float(w.min()), float(w.max())

    assert lambda_min <= lambda_max

    return lambda_min, lambda_max


def column_inner_product(pi: SketchMatrix, i: int, j: int) -> float:
    """Exact inner product of columns `i` and `j` of a sketch."""
    a, b = pi.column(i), pi.column(j)
    _, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
    return float(np.dot(a.values[ia], b.values[ib]))


def column_norms(pi: SketchMatrix) -> NDArray[np.float64]:
    """Euclidean norm of every column."""
    return np.asarray(sparse_norm(pi.matrix, axis=0), dtype=np.float64).reshape(-1)


def _format_comments(comments: Iterable[str]) -> list[str]:
    return [f"# {line}".rstrip() for c in comments for line in str(c).splitlines()]


def format_sketch(pi: SketchMatrix, comments: Iterable[str] = ()) -> str:
    """Render a sketch in the OSE1 text format."""
    lines = [f"OSE1 {pi.rows} {pi.cols} {pi.max_col_nnz}", *_format_comments(comments)]
    indptr, indices, data = pi.matrix.indptr, pi.matrix.indices, pi.matrix.data
    for j in np.flatnonzero(np.diff(indptr)):
        start, end = indptr[j], indptr[j + 1]
        entries = " ".join(f"{r} {v:.17g}" for r, v in zip(indices[start:end], data[start:end]))
        lines.append(f"{j} {end - start} {entries}")
    return "\n".join(lines) + "\n"


def _content_lines(text: str) -> list[str]:
    return [line for line in text.splitlines() if line.strip() and not line.startswith("#")]


def parse_sketch(text: str) -> SketchMatrix:
    """Parse the OSE1 text format."""
    lines = _content_lines(text)
    if not lines:
        raise ValueError("Empty OSE1 input.")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "OSE1":
        raise ValueError(f"Invalid OSE1 header: {lines[0]!r}.")
    m, n, s = (int(x) for x in header[1:])
    if m < 1 or n < 1:
        raise ValueError(f"Invalid OSE1 dimensions {m} x {n}.")

    columns: list[SparseVector | None] = [None] * n
    for line in lines[1:]:
        tokens = line.split()
        j, k = int(tokens[0]), int(tokens[1])
        if len(tokens) != 2 + 2 * k:
            raise ValueError(f"Column line for column {j} declares {k} entries but has {len(tokens)} tokens.")
        if not 0 <= j < n:
            raise ValueError(f"Column index {j} out of range [0, {n}).")
        if columns[j] is not None:
            raise ValueError(f"Column {j} appears twice.")
        rows = [int(x) for x in tokens[2::2]]
        values = [float(x) for x in tokens[3::2]]
        if any(v == 0 for v in values):
            raise ValueError(f"Column {j} stores an explicit zero.")
        columns[j] = SparseVector(np.array(rows, dtype=np.int64), np.array(values))
    return SketchMatrix.from_columns(columns, m, s)


def write_sketch(path: str, pi: SketchMatrix, comments: Iterable[str] = ()) -> None:
    atomic_write(path, format_sketch(pi, comments))


def read_sketch(path: str) -> SketchMatrix:
    with open(path) as f:
        return parse_sketch(f.read())


def format_dense(a: DenseMatrix, comments: Iterable[str] = ()) -> str:
    """Render a dense matrix in the OSE1D text format (one row per line)."""
    a = np.asarray(a, dtype=np.float64)
    if not np.isfinite(a).all():
        raise NumericInputError("Matrix contains non-finite entries.")
    lines = [f"OSE1D {a.shape[0]} {a.shape[1]}", *_format_comments(comments)]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in a]
    return "\n".join(lines) + "\n"


def parse_dense(text: str) -> DenseMatrix:
    """Parse the OSE1D text format."""
    lines = _content_lines(text)
    if not lines:
        raise ValueError("Empty OSE1D input.")
    header = lines[0].split()
    if len(header) != 3 or header[0] != "OSE1D":
        raise ValueError(f"Invalid OSE1D header: {lines[0]!r}.")
    m, n = int(header[1]), int(header[2])
    values = np.array([float(x) for line in lines[1:] for x in line.split()])
    if values.size != m * n:
        raise ValueError(f"Expected {m * n} values, got {values.size}.")
    if not np.isfinite(values).all():
        raise NumericInputError("Matrix contains non-finite entries.")
    return values.reshape(m, n)


def write_dense(path: str, a: DenseMatrix, comments: Iterable[str] = ()) -> None:
    atomic_write(path, format_dense(a, comments))


def read_dense(path: str) -> DenseMatrix:
    with open(path) as f:
        return parse_dense(f.read())
