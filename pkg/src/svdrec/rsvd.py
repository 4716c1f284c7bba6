"""Randomized low-rank factorization: basic, fixed-precision, and pass-efficient.

Three entry points share the same blocked QB machinery:

- :func:`basic_rsvd` sketches once at a known target rank, with optional
  power iterations and oversampling.
- :func:`fixed_precision_qb` grows a QB factorization block by block until
  the Frobenius residual drops below a requested fraction of ``||A||_F``,
  then trims the final block to the smallest sufficient rank.
- :func:`adaptive_pca` grows the factorization under a pluggable
  termination criterion while holding the number of passes over the sparse
  matrix to a fixed budget per block, then converts QB to an SVD through
  the Gram-matrix route.

The two block generators, :func:`qb_power_blocks` and
:func:`qb_pass_blocks`, are exposed so callers can watch the factorization
grow one block at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
import scipy.linalg

from .linalg import (
    GaussianStream,
    SvdTriplet,
    eig_svd,
    fro_norm_sq,
    lu_lower_basis,
    orthonormal_basis,
    sparse_dense_mul,
)
from .sparse import SparseRatings


@dataclass(frozen=True, eq=False)
class QbState:
    """Snapshot of a growing QB factorization after a completed block.

    ``err`` is the running estimate of ``||A - Q @ B||_F^2``, maintained by
    subtracting each block's ``||B_i||_F^2`` from ``||A||_F^2``; it is
    clamped at zero since rounding can push the true tiny residual
    negative.
    """

    Q: np.ndarray
    B: np.ndarray
    err: float
    blocks: int
    block_size: int
    frob_sq: float

    @property
    def rank(self) -> int:
        return self.Q.shape[1]


class RankExhaustedError(RuntimeError):
    """The factorization hit its rank cap before the stop condition held."""

    def __init__(self, message: str, state: QbState | None = None) -> None:
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class FixedRank:
    """Stop once the factorization holds at least ``k`` columns."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")

    def __call__(self, state: QbState) -> bool:
        return state.rank >= self.k


@dataclass(frozen=True)
class FrobTolerance:
    """Stop once ``||A - QB||_F <= eps * ||A||_F`` by the running estimate."""

    eps: float

    def __post_init__(self) -> None:
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")

    def __call__(self, state: QbState) -> bool:
        return state.err < self.eps * self.eps * state.frob_sq


TerminationCriterion = Callable[[QbState], bool]


def _empty_state(A: SparseRatings, block_size: int, frob: float) -> QbState:
    return QbState(
        Q=np.empty((A.m, 0)),
        B=np.empty((0, A.n)),
        err=frob,
        blocks=0,
        block_size=block_size,
        frob_sq=frob,
    )


def qb_power_blocks(
    A: SparseRatings,
    block_size: int,
    power: int,
    stream: GaussianStream,
) -> Iterator[QbState]:
    """Yield QB snapshots, one per block, using power-iteration refinement.

    Each block draws a fresh (n, b) Gaussian sketch, deflates the part of A
    already captured, runs ``power`` rounds of alternating projections
    against the deflated residual, re-orthogonalizes against the
    accumulated basis, and appends.  Stops before a block would push the
    rank past min(m, n).
    """
    m, n = A.shape
    b = block_size
    frob = fro_norm_sq(A)
    Q = np.empty((m, 0))
    B = np.empty((0, n))
    err = frob
    blocks = 0
    while (blocks + 1) * b <= min(m, n):
        omega = stream.normal(n, b)
        y = sparse_dense_mul(A, omega) - Q @ (B @ omega)
        qi = orthonormal_basis(y, check_rank=False)
        for _ in range(power):
            g = sparse_dense_mul(A, qi, transpose_a=True) - B.T @ (Q.T @ qi)
            g = orthonormal_basis(g, check_rank=False)
            qi = sparse_dense_mul(A, g) - Q @ (B @ g)
            qi = orthonormal_basis(qi, check_rank=False)
        qi = orthonormal_basis(qi - Q @ (Q.T @ qi), check_rank=False)
        bi = sparse_dense_mul(A, qi, transpose_a=True).T
        Q = np.hstack([Q, qi])
        B = np.vstack([B, bi])
        err = max(err - fro_norm_sq(bi), 0.0)
        blocks += 1
        yield QbState(Q=Q, B=B, err=err, blocks=blocks, block_size=b, frob_sq=frob)


def qb_pass_blocks(
    A: SparseRatings,
    block_size: int,
    passes: int,
    stream: GaussianStream,
) -> Iterator[QbState]:
    """Yield QB snapshots holding sparse-matrix passes to ``passes`` per block.

    Power refinement runs through cheap LU range approximations instead of
    QR, and intermediate products apply A @ A.T without deflating the
    accumulated basis; only the first and last steps of a block subtract
    the captured part.  An even pass budget starts from a Gaussian sketch
    of A, an odd one from a Gaussian block in the row space.  Stops before
    the rank would exceed min(m, n) - block_size.
    """
    m, n = A.shape
    b = block_size
    if passes < 2:
        raise ValueError("passes must be at least 2")
    frob = fro_norm_sq(A)
    Q = np.empty((m, 0))
    B = np.empty((0, n))
    err = frob
    blocks = 0
    nsteps = (passes - 1) // 2
    while (blocks + 1) * b <= min(m, n) - b:
        if passes % 2 == 0:
            omega = stream.normal(n, b)
            y = sparse_dense_mul(A, omega) - Q @ (B @ omega)
            ql = lu_lower_basis(y)
        else:
            ql = stream.normal(m, b)
        for t in range(1, nsteps + 1):
            if t == nsteps:
                r = sparse_dense_mul(A, ql, transpose_a=True)
                ql = orthonormal_basis(
                    sparse_dense_mul(A, r) - Q @ (B @ r), check_rank=False
                )
            else:
                ql = lu_lower_basis(
                    sparse_dense_mul(A, sparse_dense_mul(A, ql, transpose_a=True))
                )
        ql = orthonormal_basis(ql - Q @ (Q.T @ ql), check_rank=False)
        bl = sparse_dense_mul(A, ql, transpose_a=True).T
        Q = np.hstack([Q, ql])
        B = np.vstack([B, bl])
        err = max(err - fro_norm_sq(bl), 0.0)
        blocks += 1
        yield QbState(Q=Q, B=B, err=err, blocks=blocks, block_size=b, frob_sq=frob)


def _refined_rank(B: np.ndarray, frob_sq: float, eps: float) -> tuple[int, float]:
    """Smallest row count of B whose captured energy already meets eps.

    Returns that rank and the matching residual estimate.  Row energies are
    scanned cumulatively; because B's rows come from orthonormal Q columns,
    dropping trailing rows only adds their energy back onto the residual.
    """
    row_sq = np.einsum("ij,ij->i", B, B)
    cum = np.cumsum(row_sq)
    resid = frob_sq - cum
    hits = np.nonzero(resid < eps * eps * frob_sq)[0]
    k = int(hits[0]) + 1 if hits.size else B.shape[0]
    return k, max(float(frob_sq - cum[k - 1]), 0.0)


def basic_rsvd(
    A: SparseRatings,
    k: int,
    power: int = 0,
    oversample: int = 0,
    seed: int = 0,
) -> SvdTriplet:
    """Rank-k randomized SVD with a single sketch.

    Parameters
    ----------
    A : SparseRatings
    k : int
        Target rank of the returned factorization.
    power : int
        Rounds of power iteration; each adds two passes over A and sharpens
        the subspace when the spectrum decays slowly.
    oversample : int
        Extra sketch columns carried through the computation and dropped at
        the end; improves accuracy for roughly flat spectra.
    seed : int
        Seed for the Gaussian sketch.

    Raises
    ------
    ValueError
        If ``k + oversample`` exceeds min(m, n).
    RankDeficientError
        If a sketch loses column rank, e.g. when A's rank is below
        ``k + oversample``.
    """
    m, n = A.shape
    if k < 1:
        raise ValueError("k must be positive")
    if power < 0 or oversample < 0:
        raise ValueError("power and oversample must be nonnegative")
    ell = k + oversample
    if ell > min(m, n):
        raise ValueError(f"k + oversample = {ell} exceeds min(m, n) = {min(m, n)}")
    stream = GaussianStream(seed)
    omega = stream.normal(n, ell)
    q = orthonormal_basis(sparse_dense_mul(A, omega))
    for _ in range(power):
        g = orthonormal_basis(sparse_dense_mul(A, q, transpose_a=True))
        q = orthonormal_basis(sparse_dense_mul(A, g))
    b = sparse_dense_mul(A, q, transpose_a=True).T
    ub, s, vt = scipy.linalg.svd(b, full_matrices=False)
    return SvdTriplet((q @ ub)[:, :k], s[:k], vt[:k].T, k)


def fixed_precision_qb(
    A: SparseRatings,
    tol: float,
    block_size: int = 20,
    power: int = 0,
    seed: int = 0,
) -> QbState:
    """Grow a QB factorization until ``||A - QB||_F <= tol * ||A||_F``.

    The rank is not chosen in advance: blocks of ``block_size`` columns are
    appended until the running residual estimate crosses the threshold, and
    the final block is trimmed to the smallest rank that still satisfies
    the tolerance.

    Raises
    ------
    ValueError
        On tol outside (0, 1) or a block size the matrix cannot host.
    RankExhaustedError
        If the tolerance is still unmet when the rank cap is reached; the
        last state is attached to the exception.
    """
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    if block_size < 1:
        raise ValueError("block_size must be positive")
    if power < 0:
        raise ValueError("power must be nonnegative")
    if block_size > min(A.shape):
        raise ValueError(
            f"block_size {block_size} exceeds min(m, n) = {min(A.shape)}"
        )
    frob = fro_norm_sq(A)
    if frob == 0.0:
        return _empty_state(A, block_size, 0.0)
    threshold = tol * tol * frob
    stream = GaussianStream(seed)
    last: QbState | None = None
    for state in qb_power_blocks(A, block_size, power, stream):
        last = state
        if state.err < threshold:
            k, err = _refined_rank(state.B, frob, tol)
            return QbState(
                Q=state.Q[:, :k],
                B=state.B[:k],
                err=err,
                blocks=state.blocks,
                block_size=block_size,
                frob_sq=frob,
            )
    raise RankExhaustedError(
        f"residual target {tol:.3e} unmet at rank cap", state=last
    )


def adaptive_pca(
    A: SparseRatings,
    criterion: TerminationCriterion,
    block_size: int = 20,
    passes: int = 10,
    seed: int = 0,
) -> SvdTriplet:
    """Blocked randomized SVD with a fixed pass budget and pluggable stopping.

    After every block the ``criterion`` sees the current
    :class:`QbState`; the first block where it returns true ends the loop.
    :class:`FixedRank` then keeps its requested leading rank,
    :class:`FrobTolerance` trims the basis to the smallest rank meeting the
    tolerance, and any other callable keeps everything accumulated.  The QB
    factors are converted to singular factors via the Gram-matrix SVD of
    ``B.T``, which is cheap because B has few rows.

    A matrix with more rows than columns is factored through its transpose
    and the singular vector blocks are swapped back.

    Raises
    ------
    ValueError
        On a pass budget of 2 or less, or a block size the matrix
        cannot host.
    RankExhaustedError
        If the criterion never fires before the rank cap.
    NearSingularError
        Propagated from the final conversion when B's rows are linearly
        dependent at working precision, e.g. a fixed rank above the
        numerical rank of A.
    """
    if passes <= 2:
        raise ValueError("passes must exceed 2")
    if block_size < 1:
        raise ValueError("block_size must be positive")
    m, n = A.shape
    work = A.transposed() if m > n else A
    b = block_size
    if isinstance(criterion, FixedRank):
        b = min(b, criterion.k)
    if 2 * b > min(m, n):
        raise ValueError(f"block_size {b} too large for min(m, n) = {min(m, n)}")
    stream = GaussianStream(seed)
    met: QbState | None = None
    last: QbState | None = None
    for state in qb_pass_blocks(work, b, passes, stream):
        last = state
        if criterion(state):
            met = state
            break
    if met is None:
        raise RankExhaustedError("termination criterion never met", state=last)
    if isinstance(criterion, FixedRank):
        k = criterion.k
        q_mat, b_mat = met.Q, met.B
    elif isinstance(criterion, FrobTolerance):
        k, _ = _refined_rank(met.B, met.frob_sq, criterion.eps)
        q_mat, b_mat = met.Q[:, :k], met.B[:k]
    else:
        k = met.rank
        q_mat, b_mat = met.Q, met.B
    r = b_mat.shape[0]
    dec = eig_svd(b_mat.T)
    idx = np.arange(r - 1, r - 1 - k, -1)
    u = q_mat @ dec.v[:, idx]
    s = dec.s[idx]
    v = dec.u[:, idx]
    if m > n:
        u, v = v, u
    return SvdTriplet(u, s, v, int(k))
