"""Dense and sparse building blocks for the randomized factorizations.

Everything here is a thin, contract-checked layer over LAPACK-backed
routines; the randomized algorithms themselves live in :mod:`svdrec.rsvd`.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .sparse import SparseRatings

ORTH_RANK_FLOOR = 1e-12
EIG_FLOOR = 1e-14


class RankDeficientError(ValueError):
    """A matrix that must have full column rank does not."""


class NearSingularError(ValueError):
    """A Gram matrix has eigenvalues at or below the numerical floor."""


class GaussianStream:
    """Counter-based deterministic source of standard normal matrices.

    Successive calls consume the stream in order, so two consumers that
    draw the same shapes in the same order from equal seeds see identical
    matrices.  Used to keep separately-run factorizations sketch-aligned.
    """

    def __init__(self, seed: int) -> None:
        self._gen = np.random.Generator(np.random.Philox(key=int(seed)))

    def normal(self, rows: int, cols: int) -> np.ndarray:
        return self._gen.standard_normal((rows, cols))


def gaussian_matrix(rows: int, cols: int, seed: int | GaussianStream) -> np.ndarray:
    """Standard normal matrix, deterministic for a given seed.

    Accepts either an integer seed (fresh stream) or an existing
    :class:`GaussianStream` to continue drawing from.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    stream = seed if isinstance(seed, GaussianStream) else GaussianStream(seed)
    return stream.normal(rows, cols)


def orthonormal_basis(M: np.ndarray, check_rank: bool = True) -> np.ndarray:
    """Orthonormal basis of range(M) via Householder QR.

    Parameters
    ----------
    M : ndarray, shape (m, n) with m >= n
    check_rank : bool
        When true, raise :class:`RankDeficientError` if any R diagonal
        magnitude falls below ``1e-12 * ||M||_F``.  Internal callers that
        tolerate deflated sketches pass False; the returned Q is still
        orthonormal, but trailing columns may lie outside range(M).
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ValueError(f"expected rows >= cols, got shape {M.shape}")
    q, r = scipy.linalg.qr(M, mode="economic")
    if check_rank:
        diag = np.abs(np.diag(r))
        floor = ORTH_RANK_FLOOR * np.linalg.norm(M)
        if M.shape[1] > 0 and (diag.size < M.shape[1] or diag.min() < floor):
            raise RankDeficientError(
                f"column rank below {M.shape[1]}: min |R_ii| = "
                f"{diag.min() if diag.size else 0.0:.3e}, floor {floor:.3e}"
            )
    return q


def lu_lower_basis(M: np.ndarray) -> np.ndarray:
    """Permuted lower-triangular factor P·L of a partial-pivoting LU.

    Cheaper than QR and good enough as a range approximation inside power
    iterations; columns are unit-diagonal triangular, not orthonormal.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ValueError(f"expected rows >= cols, got shape {M.shape}")
    pl, u = scipy.linalg.lu(M, permute_l=True)
    if np.any(np.diag(u) == 0.0):
        raise RankDeficientError("exactly singular pivot in LU factorization")
    return pl


class EigSvd(NamedTuple):
    """SVD factors with singular values in ascending order."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def eig_svd(M: np.ndarray) -> EigSvd:
    """SVD of a tall matrix through the eigendecomposition of its Gram matrix.

    Returns ``EigSvd(u, s, v)`` with ``M = u @ diag(s) @ v.T`` and ``s``
    ascending, mirroring the symmetric eigensolver's value ordering.  One
    n x n eigendecomposition plus two products makes this much faster than
    bidiagonalization when M has few columns, at the cost of squaring the
    condition number.

    Raises
    ------
    NearSingularError
        If the smallest Gram eigenvalue is at or below
        ``1e-14 * ||M||_F^2``, where left singular vectors would be
        meaningless.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ValueError(f"expected rows >= cols, got shape {M.shape}")
    gram = M.T @ M
    w, vecs = scipy.linalg.eigh(gram)
    floor = EIG_FLOOR * float(np.trace(gram))
    if M.shape[1] > 0 and (w[0] <= 0.0 or w[0] < floor):
        raise NearSingularError(
            f"Gram eigenvalue {w[0]:.3e} below floor {floor:.3e}"
        )
    s = np.sqrt(w)
    u = (M @ vecs) / s
    return EigSvd(u, s, vecs)


def sparse_dense_mul(
    A: SparseRatings, X: np.ndarray, transpose_a: bool = False
) -> np.ndarray:
    """Product A @ X, or A.T @ X when ``transpose_a``; the only route by
    which the factorization code touches the sparse matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-d")
    inner = A.m if transpose_a else A.n
    if X.shape[0] != inner:
        side = "A.T" if transpose_a else "A"
        raise ValueError(
            f"dimension mismatch: {side} has {inner} columns, X has {X.shape[0]} rows"
        )
    if transpose_a:
        return A.matrix.T @ X
    return A.matrix @ X


def fro_norm_sq(M: SparseRatings | np.ndarray) -> float:
    """Squared Frobenius norm; touches only stored values for sparse input."""
    if isinstance(M, SparseRatings):
        data = M.matrix.data
        return float(np.dot(data, data))
    M = np.asarray(M, dtype=np.float64)
    flat = M.ravel()
    return float(np.dot(flat, flat))


class SvdTriplet(NamedTuple):
    """Rank-k factorization ``u @ diag(s) @ v.T`` with s descending."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    k: int

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T
