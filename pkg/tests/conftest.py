"""Shared fixtures: synthetic matrices, rating models, and dataset discovery."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from svdrec import RatingSample, SparseRatings, load_ratings_csv

ML100K_USERS = 610
ML100K_ITEMS = 9724
ML100K_RATINGS = 100_836


def sparse_random(
    m: int, n: int, density: float, seed: int, grid: bool = True
) -> tuple[np.ndarray, SparseRatings]:
    """Random sparse ratings-like matrix; values on the half-point grid by
    default so Frobenius sums are exactly representable."""
    rng = np.random.default_rng(seed)
    mask = rng.random((m, n)) < density
    if grid:
        values = rng.integers(1, 11, size=(m, n)) * 0.5
    else:
        values = rng.uniform(0.5, 5.0, (m, n))
    dense = np.where(mask, values, 0.0)
    return dense, SparseRatings.from_dense(dense, bounds=(0.5, 5.0))


def exact_rank_matrix(
    m: int, n: int, r: int, seed: int
) -> tuple[np.ndarray, SparseRatings]:
    """Dense matrix of exact rank r, wrapped with observed bounds."""
    rng = np.random.default_rng(seed)
    left = rng.standard_normal((m, r))
    right = rng.standard_normal((r, n))
    dense = left @ right
    ratings = SparseRatings.from_dense(
        dense, bounds=(float(dense.min()), float(dense.max()))
    )
    return dense, ratings


def group_rating_model(
    m: int,
    n: int,
    r: int,
    density: float,
    seed: int,
    holdout: float = 0.1,
) -> tuple[SparseRatings, list[RatingSample], list[RatingSample], np.ndarray]:
    """Synthetic rank-r rating model with item groups.

    Every user rates each of r item groups at one of r distinct levels
    (a per-user shuffle of the full range), so the complete matrix is
    exactly rank <= r and holds grid-valued ratings in [1, 5].  A random
    subset of cells is observed; the observed set is split into train and
    two equal held-out parts.
    Returns (train matrix, validation, test, complete matrix).
    """
    rng = np.random.default_rng(seed)
    levels = np.linspace(1.0, 5.0, r)
    profile = np.tile(levels, (m, 1))
    perm = np.argsort(rng.random((m, r)), axis=1)
    profile = np.take_along_axis(profile, perm, axis=1)
    groups = rng.integers(0, r, size=n)
    full = profile[:, groups]
    obs_i, obs_j = np.nonzero(rng.random((m, n)) < density)
    order = rng.permutation(obs_i.size)
    n_hold = int(obs_i.size * holdout / 2)
    val_idx = order[:n_hold]
    test_idx = order[n_hold : 2 * n_hold]
    train_idx = order[2 * n_hold :]
    train = SparseRatings.from_coo(
        obs_i[train_idx],
        obs_j[train_idx],
        full[obs_i[train_idx], obs_j[train_idx]],
        shape=(m, n),
        bounds=(1.0, 5.0),
    )
    val = [
        RatingSample(int(obs_i[t]), int(obs_j[t]), float(full[obs_i[t], obs_j[t]]))
        for t in val_idx
    ]
    test = [
        RatingSample(int(obs_i[t]), int(obs_j[t]), float(full[obs_i[t], obs_j[t]]))
        for t in test_idx
    ]
    return train, val, test, full


def gram_schmidt(M: np.ndarray) -> np.ndarray:
    """Classical Gram-Schmidt orthonormalization, as an independent oracle."""
    M = np.asarray(M, dtype=np.float64)
    q = np.zeros_like(M)
    for j in range(M.shape[1]):
        v = M[:, j].copy()
        for i in range(j):
            v -= np.dot(q[:, i], M[:, j]) * q[:, i]
        norm = np.linalg.norm(v)
        q[:, j] = v / norm
    return q


def predict_oracle(A, factors, user, item):
    """Brute-force weighted-average prediction, written as plain loops.

    Returns (raw, value, fallback) mirroring the library contract: cosine
    similarity over latent item columns, zero-norm columns skipped, weight
    magnitudes below 1e-9 falling back to the user mean (global mean when
    the user has no ratings).
    """
    T = factors.T
    norms = [float(np.sqrt(sum(T[f, j] ** 2 for f in range(T.shape[0]))))
             for j in range(T.shape[1])]

    def fallback():
        start, end = int(A.indptr[user]), int(A.indptr[user + 1])
        if start == end:
            total, count = 0.0, 0
            for v in A.data:
                total += float(v)
                count += 1
            mean = total / count
        else:
            vals = [float(v) for v in A.data[start:end]]
            mean = sum(vals) / len(vals)
        value = min(max(mean, A.rating_min), A.rating_max)
        return mean, value, True

    if norms[item] == 0.0:
        return fallback()
    start, end = int(A.indptr[user]), int(A.indptr[user + 1])
    if start == end:
        return fallback()
    acc = 0.0
    weight = 0.0
    for pos in range(start, end):
        col = int(A.indices[pos])
        if norms[col] == 0.0:
            continue
        dot = sum(float(T[f, col]) * float(T[f, item]) for f in range(T.shape[0]))
        sim = dot / (norms[col] * norms[item])
        acc += sim * float(A.data[pos])
        weight += sim
    if abs(weight) < 1e-9:
        return fallback()
    raw = acc / weight
    value = min(max(raw, A.rating_min), A.rating_max)
    return raw, value, False


def _find_ml100k() -> Path | None:
    env = os.environ.get("SVDREC_ML100K")
    candidates = []
    if env:
        candidates.append(Path(env))
    here = Path(__file__).resolve().parent.parent
    candidates.append(here / "data" / "ml-latest-small" / "ratings.csv")
    for cand in candidates:
        if cand.is_file():
            return cand
    return None


@pytest.fixture(scope="session")
def ml100k():
    """MovieLens 100K ratings, skipped when the file is not on disk.

    Set SVDREC_ML100K to the ratings.csv path or place the extracted
    archive under data/ml-latest-small/; scripts/fetch_movielens.py
    downloads it when network access exists.
    """
    path = _find_ml100k()
    if path is None:
        pytest.skip(
            "MovieLens 100K not available; set SVDREC_ML100K or run "
            "scripts/fetch_movielens.py"
        )
    ds = load_ratings_csv(path)
    if (ds.m, ds.n, ds.nnz) != (ML100K_USERS, ML100K_ITEMS, ML100K_RATINGS):
        pytest.skip(
            f"unexpected MovieLens variant at {path}: "
            f"{ds.m} users, {ds.n} items, {ds.nnz} ratings"
        )
    return ds
