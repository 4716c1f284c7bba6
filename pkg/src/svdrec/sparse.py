"""Sparse container for user-item rating matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse as sp


@dataclass(frozen=True, eq=False)
class SparseRatings:
    """Immutable CSR wrapper holding observed ratings plus the legal rating range.

    The wrapped matrix is kept in canonical CSR form: within each row the
    column indices are strictly increasing, so there are no duplicate
    entries and binary search over a row slice is valid.  Stored values are
    the observed ratings; unobserved cells are structurally absent rather
    than stored zeros.

    Parameters
    ----------
    matrix : scipy.sparse.csr_matrix
        Ratings with shape (users, items), float64 data.
    rating_min, rating_max : float
        Inclusive bounds of the rating scale.  Every stored value must lie
        inside them; predictions are clamped to this interval.
    """

    matrix: sp.csr_matrix
    rating_min: float
    rating_max: float

    def __post_init__(self) -> None:
        if not sp.issparse(self.matrix) or self.matrix.format != "csr":
            raise TypeError("matrix must be a scipy CSR matrix")
        mat = self.matrix.astype(np.float64, copy=False)
        mat.sort_indices()
        object.__setattr__(self, "matrix", mat)
        if self.rating_min > self.rating_max:
            raise ValueError("rating_min exceeds rating_max")
        self._check_canonical()
        data = self.matrix.data
        if data.size:
            if not np.all(np.isfinite(data)):
                raise ValueError("ratings must be finite")
            lo, hi = data.min(), data.max()
            if lo < self.rating_min or hi > self.rating_max:
                raise ValueError(
                    f"ratings outside [{self.rating_min}, {self.rating_max}]: "
                    f"observed [{lo}, {hi}]"
                )

    def _check_canonical(self) -> None:
        indptr = self.matrix.indptr
        indices = self.matrix.indices
        # Strictly increasing indices inside every row rule out duplicates.
        if indices.size > 1:
            diffs = np.diff(indices)
            row_starts = indptr[1:-1]
            boundary = row_starts[(row_starts > 0) & (row_starts < indices.size)]
            inner = np.ones(indices.size - 1, dtype=bool)
            inner[boundary - 1] = False
            if np.any(diffs[inner] <= 0):
                raise ValueError("duplicate or unsorted column indices in a row")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    @property
    def data(self) -> np.ndarray:
        return self.matrix.data

    @property
    def indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def indptr(self) -> np.ndarray:
        return self.matrix.indptr

    def row_slice(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and values of row ``i`` as contiguous views."""
        if not 0 <= i < self.m:
            raise IndexError(f"row {i} out of range for {self.m} rows")
        start, end = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.indices[start:end], self.matrix.data[start:end]

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def transposed(self) -> "SparseRatings":
        """Same ratings with users and items swapped."""
        return SparseRatings(
            self.matrix.transpose().tocsr(), self.rating_min, self.rating_max
        )

    @classmethod
    def from_coo(
        cls,
        rows: np.ndarray,
        cols: np.ndarray,
        values: np.ndarray,
        shape: tuple[int, int],
        bounds: tuple[float, float] | None = None,
    ) -> "SparseRatings":
        """Build from coordinate triples; bounds default to the observed range."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not rows.size == cols.size == values.size:
            raise ValueError("rows, cols, values must have equal length")
        coo = sp.coo_matrix((values, (rows, cols)), shape=shape)
        csr = coo.tocsr()
        # CSR conversion merges duplicate coordinates, shrinking nnz.
        if csr.nnz != values.size:
            raise ValueError("duplicate coordinates are not allowed")
        if bounds is None:
            if values.size == 0:
                bounds = (0.0, 0.0)
            else:
                bounds = (float(values.min()), float(values.max()))
        return cls(csr, float(bounds[0]), float(bounds[1]))

    @classmethod
    def from_dense(
        cls, arr: np.ndarray, bounds: tuple[float, float] | None = None
    ) -> "SparseRatings":
        """Treat nonzero entries of a dense array as observed ratings."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-d array")
        csr = sp.csr_matrix(arr)
        if bounds is None:
            if csr.nnz == 0:
                bounds = (0.0, 0.0)
            else:
                bounds = (float(csr.data.min()), float(csr.data.max()))
        return cls(csr, float(bounds[0]), float(bounds[1]))
