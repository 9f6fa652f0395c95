"""Symmetric sparse matrices stored as their lower triangle in CSC form."""

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import scipy.io
import scipy.sparse as sp

from octrans.core.exceptions import InvariantViolation
from octrans.core.logging import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class SparseSym:
    """Symmetric matrix of order ``n``; only entries with row >= column are kept.

    Row indices are strictly increasing within each column.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @classmethod
    def from_coo(
        cls, n: int, rows: np.ndarray, cols: np.ndarray, values: np.ndarray
    ) -> "SparseSym":
        """Duplicates are summed; upper-triangle entries are mirrored down."""
        return CooAssembly.plan(n, rows, cols).assemble(values)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseSym":
        """Nonzeros of the lower triangle plus the whole diagonal."""
        lower = np.tril(np.asarray(dense, dtype=np.float64))
        mask = lower != 0.0
        mask[np.diag_indices_from(mask)] = True
        rows, cols = np.nonzero(mask)
        return cls.from_coo(lower.shape[0], rows, cols, lower[rows, cols])

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n, self.n

    def with_data(self, data: np.ndarray) -> "SparseSym":
        if len(data) != self.nnz:
            raise InvariantViolation(
                "value array does not match the pattern",
                details={"expected": self.nnz, "got": len(data)},
            )
        return SparseSym(self.n, self.indptr, self.indices, data)

    def column_indices(self) -> np.ndarray:
        """Column of every stored entry."""
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def diagonal(self) -> np.ndarray:
        cols = self.column_indices()
        diag = np.zeros(self.n)
        on = self.indices == cols
        diag[cols[on]] = self.data[on]
        return diag

    def shifted(self, shift: np.ndarray) -> "SparseSym":
        """Copy with ``shift`` added to the diagonal; the diagonal becomes explicit."""
        cols = self.column_indices()
        on = self.indices == cols
        if np.count_nonzero(on) == self.n:
            data = self.data.copy()
            data[on] += shift[cols[on]]
            return self.with_data(data)
        diag = np.arange(self.n)
        return SparseSym.from_coo(
            self.n,
            np.concatenate([self.indices, diag]),
            np.concatenate([cols, diag]),
            np.concatenate([self.data, shift]),
        )

    def to_scipy_lower(self) -> sp.csc_matrix:
        return sp.csc_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    def to_scipy(self) -> sp.csc_matrix:
        """Full symmetric matrix."""
        lower = self.to_scipy_lower()
        return (lower + lower.T - sp.diags(lower.diagonal())).tocsc()

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        lower = self.to_scipy_lower()
        return lower @ x + lower.T @ x - self.diagonal() * x

    def norm_max(self) -> float:
        return float(np.max(np.abs(self.data))) if self.nnz else 0.0

    def norm_inf(self) -> float:
        """Largest absolute row sum of the full matrix."""
        if self.nnz == 0:
            return 0.0
        cols = self.column_indices()
        mags = np.abs(self.data)
        sums = np.zeros(self.n)
        np.add.at(sums, self.indices, mags)
        off = self.indices != cols
        np.add.at(sums, cols[off], mags[off])
        return float(sums.max())


@dataclass(frozen=True)
class CooAssembly:
    """Fixed mapping from coordinate entries to a lower CSC pattern.

    Built once per pattern; :meth:`assemble` then only sums values.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    position: np.ndarray  # target slot of each coordinate entry

    @classmethod
    def plan(cls, n: int, rows: np.ndarray, cols: np.ndarray) -> "CooAssembly":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.shape != cols.shape:
            raise InvariantViolation("row and column arrays differ in length")
        if len(rows) and (
            min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= n
        ):
            raise InvariantViolation("coordinate outside the matrix", details={"n": n})
        lo = np.maximum(rows, cols)
        hi = np.minimum(rows, cols)
        keys, position = np.unique(hi * n + lo, return_inverse=True)
        col_of, row_of = np.divmod(keys, n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(col_of, minlength=n), out=indptr[1:])
        return cls(n, indptr, row_of.astype(np.int64), position.astype(np.int64))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def assemble(self, values: np.ndarray) -> SparseSym:
        data = np.bincount(self.position, weights=values, minlength=self.nnz)
        return SparseSym(self.n, self.indptr, self.indices, data.astype(np.float64))


def write_matrix_market(path: Union[str, Path], matrix: SparseSym) -> Path:
    """Export ``matrix`` as a symmetric Matrix Market file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(path), matrix.to_scipy(), symmetry="symmetric")
    logger.debug("matrix_written", path=str(path), n=matrix.n, nnz=matrix.nnz)
    return path
