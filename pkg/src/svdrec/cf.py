"""Item-based collaborative filtering on latent factors.

Items are embedded as columns of a small factor matrix T distilled from a
QB factorization of the training ratings; a rating prediction for
(user, item) is the similarity-weighted average of that user's known
ratings, where similarity is the cosine between item columns of T.
:func:`auto_latent_factors` picks the number of latent dimensions by
growing the factorization block by block and watching the validation MAE.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .linalg import GaussianStream, eig_svd
from .rsvd import QbState, RankExhaustedError, qb_pass_blocks
from .sparse import SparseRatings

WEIGHT_FLOOR = 1e-9


class Prediction(NamedTuple):
    """A predicted rating: clamped value, raw pre-clamp value, fallback flag."""

    value: float
    raw: float
    fallback: bool


class BlockEval(NamedTuple):
    """Validation result after one factorization block."""

    k: int
    mae: float
    seconds: float


@dataclass(frozen=True, eq=False)
class LatentFactors:
    """Item embedding matrix T (k x items) with cached column norms.

    T is kept column-major so the per-item column slices taken on every
    prediction are contiguous; evaluation cost then grows linearly with k.
    Columns with zero norm mark items invisible to the factorization
    (typically items with no training ratings); they never contribute to
    similarities.
    """

    T: np.ndarray
    col_norms: np.ndarray
    k: int

    def __post_init__(self) -> None:
        if self.T.ndim != 2:
            raise ValueError("T must be 2-d")
        if self.T.shape[0] != self.k:
            raise ValueError("k must equal T's row count")
        if self.col_norms.shape != (self.T.shape[1],):
            raise ValueError("col_norms must have one entry per item")
        object.__setattr__(self, "T", np.asfortranarray(self.T, dtype=np.float64))

    @property
    def n_items(self) -> int:
        return self.T.shape[1]

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "LatentFactors":
        T = np.asfortranarray(T, dtype=np.float64)
        norms = np.linalg.norm(T, axis=0)
        return cls(T=T, col_norms=norms, k=T.shape[0])


def latent_from_qb(state: QbState) -> LatentFactors:
    """Distill item factors from a QB snapshot.

    The SVD of B places the item-side singular vectors directly;
    ``T = sqrt(S) @ V.T`` with rows ordered by descending singular value,
    so cosine similarities between T's columns weight the dominant latent
    directions most.  Raises NearSingularError when B's rows are linearly
    dependent at working precision.
    """
    if state.rank == 0:
        raise ValueError("empty factorization has no latent factors")
    dec = eig_svd(state.B.T)
    s_desc = dec.s[::-1]
    u_desc = dec.u[:, ::-1]
    T = np.sqrt(s_desc)[:, None] * u_desc.T
    return LatentFactors.from_matrix(T)


def _user_mean(A: SparseRatings, user: int) -> float | None:
    start, end = A.indptr[user], A.indptr[user + 1]
    if start == end:
        return None
    return float(A.data[start:end].mean())


def _global_mean(A: SparseRatings) -> float:
    if A.nnz == 0:
        raise ValueError("cannot take the mean of a matrix with no ratings")
    return float(A.data.mean())


def _predict(
    A: SparseRatings,
    factors: LatentFactors,
    user: int,
    item: int,
    global_mean: float | None,
) -> Prediction:
    def fall_back() -> Prediction:
        mean = _user_mean(A, user)
        if mean is None:
            mean = global_mean if global_mean is not None else _global_mean(A)
        value = min(max(mean, A.rating_min), A.rating_max)
        return Prediction(value=value, raw=mean, fallback=True)

    norm_j = factors.col_norms[item]
    if norm_j == 0.0:
        return fall_back()
    cols, vals = A.row_slice(user)
    if cols.size == 0:
        return fall_back()
    norms = factors.col_norms[cols]
    known = norms > 0.0
    if not known.any():
        return fall_back()
    cols = cols[known]
    vals = vals[known]
    # row gather on the transposed view touches contiguous memory (T is
    # column-major), keeping the cost proportional to k
    gathered = factors.T.T[cols]
    sims = (gathered @ factors.T[:, item]) / (norms[known] * norm_j)
    weight = float(sims.sum())
    if abs(weight) < WEIGHT_FLOOR:
        return fall_back()
    raw = float(sims @ vals) / weight
    value = min(max(raw, A.rating_min), A.rating_max)
    return Prediction(value=value, raw=raw, fallback=False)


def predict_rating(
    A: SparseRatings, factors: LatentFactors, user: int, item: int
) -> Prediction:
    """Predict the rating of ``user`` for ``item``.

    The prediction is the cosine-similarity-weighted average of the user's
    stored ratings, using item columns of the latent factor matrix, clamped
    to the rating range.  When no usable ratings exist or the similarity
    mass is degenerate (total weight below 1e-9), the user's mean rating is
    returned instead (the global mean for users with no ratings at all),
    with ``fallback=True``.
    """
    if not 0 <= user < A.m:
        raise IndexError(f"user {user} out of range")
    if not 0 <= item < A.n:
        raise IndexError(f"item {item} out of range")
    if factors.n_items != A.n:
        raise ValueError("factor matrix does not cover this item set")
    return _predict(A, factors, user, item, global_mean=None)


def mae(predictions: Sequence[float], truths: Sequence[float]) -> float:
    """Mean absolute error between two equally long nonempty sequences."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError("predictions and truths must be 1-d of equal length")
    if p.size == 0:
        raise ValueError("cannot average zero errors")
    return float(np.abs(p - t).mean())


def evaluate_mae(
    A: SparseRatings,
    factors: LatentFactors,
    samples: Iterable[tuple[int, int, float]],
) -> float:
    """MAE of clamped predictions over held-out (user, item, rating) triples."""
    gmean = _global_mean(A)
    preds = []
    truths = []
    for user, item, rating in samples:
        preds.append(_predict(A, factors, user, item, gmean).value)
        truths.append(rating)
    return mae(preds, truths)


class ValidationMae:
    """Termination criterion tracking held-out MAE as the rank grows.

    After each block the current factors are scored on the validation
    samples.  Improvement below ``min_improvement`` marks the block stale;
    ``patience`` consecutive stale blocks stop the factorization.  The
    factors from the best-scoring block and the full (k, MAE, seconds)
    trace stay available on the instance.
    """

    def __init__(
        self,
        train: SparseRatings,
        validation: Sequence[tuple[int, int, float]],
        patience: int = 2,
        min_improvement: float = 1e-4,
    ) -> None:
        if patience < 1:
            raise ValueError("patience must be at least 1")
        if min_improvement < 0.0:
            raise ValueError("min_improvement must be nonnegative")
        if len(validation) == 0:
            raise ValueError("validation set is empty")
        _check_disjoint(train, validation)
        self.train = train
        self.validation = list(validation)
        self.patience = patience
        self.min_improvement = min_improvement
        self.trace: list[BlockEval] = []
        self.best_mae = np.inf
        self.best_factors: LatentFactors | None = None
        self._stale = 0
        self._start = time.perf_counter()

    def __call__(self, state: QbState) -> bool:
        factors = latent_from_qb(state)
        score = evaluate_mae(self.train, factors, self.validation)
        self.trace.append(
            BlockEval(k=state.rank, mae=score, seconds=time.perf_counter() - self._start)
        )
        if score < self.best_mae - self.min_improvement:
            self._stale = 0
        else:
            self._stale += 1
        if score < self.best_mae:
            self.best_mae = score
            self.best_factors = factors
        return self._stale >= self.patience


def _check_disjoint(
    train: SparseRatings, samples: Sequence[tuple[int, int, float]]
) -> None:
    for user, item, _ in samples:
        if not (0 <= user < train.m and 0 <= item < train.n):
            raise ValueError(f"sample ({user}, {item}) outside matrix bounds")
        cols, _vals = train.row_slice(user)
        pos = np.searchsorted(cols, item)
        if pos < cols.size and cols[pos] == item:
            raise ValueError(
                f"validation sample ({user}, {item}) is present in the training matrix"
            )


def auto_latent_factors(
    A: SparseRatings,
    validation: Sequence[tuple[int, int, float]],
    block_size: int = 20,
    passes: int = 10,
    patience: int = 2,
    min_improvement: float = 1e-4,
    seed: int = 0,
) -> tuple[LatentFactors, list[BlockEval]]:
    """Grow item factors until validation MAE stops improving.

    Runs the pass-efficient QB factorization on the training matrix,
    scoring every block on ``validation``; stops after ``patience``
    consecutive blocks improve the best MAE by less than
    ``min_improvement``.  Returns the factors of the best block together
    with the whole evaluation trace.

    The matrix is factored as given, never transposed: columns must be
    items for the returned factors to embed items.
    """
    if passes <= 2:
        raise ValueError("passes must exceed 2")
    if block_size < 1:
        raise ValueError("block_size must be positive")
    if 2 * block_size > min(A.shape):
        raise ValueError(
            f"block_size {block_size} too large for min(m, n) = {min(A.shape)}"
        )
    criterion = ValidationMae(
        A, validation, patience=patience, min_improvement=min_improvement
    )
    stream = GaussianStream(seed)
    for state in qb_pass_blocks(A, block_size, passes, stream):
        if criterion(state):
            break
    if criterion.best_factors is None:
        raise RankExhaustedError("rank cap reached before any block was scored")
    return criterion.best_factors, criterion.trace
