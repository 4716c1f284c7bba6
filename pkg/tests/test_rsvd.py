"""Randomized factorization engines and their termination behavior."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

import svdrec.rsvd as rsvd_mod
from svdrec import (
    FixedRank,
    FrobTolerance,
    GaussianStream,
    NearSingularError,
    RankDeficientError,
    RankExhaustedError,
    SparseRatings,
    adaptive_pca,
    basic_rsvd,
    fixed_precision_qb,
    qb_pass_blocks,
    qb_power_blocks,
)

from conftest import exact_rank_matrix, sparse_random


def nth_state(gen, n):
    return next(itertools.islice(gen, n - 1, None))


def decay_matrix(m, n, base, seed):
    """Dense full-rank matrix with geometric singular value decay."""
    rng = np.random.default_rng(seed)
    r = min(m, n)
    u = np.linalg.qr(rng.standard_normal((m, r)))[0]
    v = np.linalg.qr(rng.standard_normal((n, r)))[0]
    s = base ** np.arange(r)
    dense = (u * s) @ v.T
    return dense, SparseRatings.from_dense(
        dense, bounds=(float(dense.min()), float(dense.max()))
    )


class TestEngineInvariants:
    @pytest.mark.parametrize("power", [0, 1, 2])
    def test_power_engine_state(self, power):
        dense, ratings = sparse_random(120, 150, 0.08, seed=power)
        frob = float(np.sum(dense * dense))
        prev_err = np.inf
        for state in qb_power_blocks(ratings, 15, power, GaussianStream(3)):
            lb = state.rank
            assert lb == state.blocks * 15
            gram_err = np.linalg.norm(state.Q.T @ state.Q - np.eye(lb))
            assert gram_err <= 1e-10 * np.sqrt(lb)
            identity_gap = abs(
                state.err - (frob - float(np.sum(state.B * state.B)))
            )
            assert identity_gap <= 1e-8 * frob
            explicit = np.linalg.norm(dense - state.Q @ state.B) ** 2
            assert abs(state.err - explicit) <= 1e-8 * frob
            assert state.err <= prev_err + 1e-8 * frob
            prev_err = state.err
            if state.blocks >= 5:
                break

    @pytest.mark.parametrize("passes", [4, 5, 10])
    def test_pass_engine_state(self, passes):
        dense, ratings = sparse_random(120, 150, 0.08, seed=passes)
        frob = float(np.sum(dense * dense))
        for state in qb_pass_blocks(ratings, 15, passes, GaussianStream(4)):
            lb = state.rank
            gram_err = np.linalg.norm(state.Q.T @ state.Q - np.eye(lb))
            assert gram_err <= 1e-10 * np.sqrt(lb)
            explicit = np.linalg.norm(dense - state.Q @ state.B) ** 2
            assert abs(state.err - explicit) <= 1e-8 * frob
            if state.blocks >= 4:
                break

    @pytest.mark.parametrize("passes", [2, 3, 4, 5, 10])
    def test_pass_budget_is_exact(self, passes, monkeypatch):
        _, ratings = sparse_random(80, 100, 0.1, seed=20)
        calls = []
        real = rsvd_mod.sparse_dense_mul

        def counting(A, X, transpose_a=False):
            calls.append(1)
            return real(A, X, transpose_a)

        monkeypatch.setattr(rsvd_mod, "sparse_dense_mul", counting)
        gen = qb_pass_blocks(ratings, 10, passes, GaussianStream(0))
        next(gen)
        assert len(calls) == passes
        next(gen)
        assert len(calls) == 2 * passes

    @pytest.mark.parametrize("power", [0, 2])
    def test_power_engine_pass_count(self, power, monkeypatch):
        _, ratings = sparse_random(80, 100, 0.1, seed=21)
        calls = []
        real = rsvd_mod.sparse_dense_mul

        def counting(A, X, transpose_a=False):
            calls.append(1)
            return real(A, X, transpose_a)

        monkeypatch.setattr(rsvd_mod, "sparse_dense_mul", counting)
        gen = qb_power_blocks(ratings, 10, power, GaussianStream(0))
        next(gen)
        assert len(calls) == 2 + 2 * power

    def test_rank_cap_power(self):
        _, ratings = sparse_random(30, 45, 0.3, seed=22)
        states = list(qb_power_blocks(ratings, 8, 0, GaussianStream(1)))
        assert states[-1].rank == 24  # one more block would pass min(m, n) = 30

    def test_rank_cap_pass(self):
        _, ratings = sparse_random(30, 45, 0.3, seed=23)
        states = list(qb_pass_blocks(ratings, 8, 4, GaussianStream(1)))
        assert states[-1].rank == 16  # cap at min(m, n) - block_size

    def test_invalid_passes(self):
        _, ratings = sparse_random(20, 20, 0.3, seed=24)
        with pytest.raises(ValueError):
            next(qb_pass_blocks(ratings, 4, 1, GaussianStream(0)))


class TestEngineEquivalence:
    """The pass-capped engine reproduces the power engine's projection when
    both draw identical sketches: exactly for the first block at any power
    count, and at any depth for zero or one power round."""

    @pytest.mark.parametrize(
        "power,blocks", [(0, 1), (1, 1), (2, 1), (0, 3), (1, 3)]
    )
    def test_products_and_projectors_match(self, power, blocks):
        dense, ratings = sparse_random(150, 200, 0.06, seed=31)
        norm = np.linalg.norm(dense)
        passes = 2 * power + 2
        s1 = nth_state(qb_power_blocks(ratings, 20, power, GaussianStream(9)), blocks)
        s2 = nth_state(qb_pass_blocks(ratings, 20, passes, GaussianStream(9)), blocks)
        prod = np.linalg.norm(s1.Q @ s1.B - s2.Q @ s2.B)
        proj = np.linalg.norm(s1.Q @ s1.Q.T - s2.Q @ s2.Q.T)
        assert prod <= 1e-6 * norm
        assert proj <= 1e-6


class TestFixedPrecisionQb:
    def test_meets_tolerance_explicitly(self):
        for seed in range(4):
            dense, ratings = sparse_random(100, 140, 0.07, seed=40 + seed)
            state = fixed_precision_qb(ratings, tol=0.6, block_size=12, power=1,
                                       seed=seed)
            explicit = np.linalg.norm(dense - state.Q @ state.B)
            assert explicit <= 0.6 * np.linalg.norm(dense)

    def test_final_rank_is_minimal(self):
        dense, ratings = sparse_random(100, 140, 0.07, seed=50)
        tol = 0.6
        state = fixed_precision_qb(ratings, tol=tol, block_size=12, power=1, seed=5)
        norm_sq = float(np.sum(dense * dense))
        kept = float(np.sum(state.B * state.B))
        assert norm_sq - kept < tol * tol * norm_sq
        if state.rank > 1:
            # one row fewer would miss the target
            short = float(np.sum(state.B[:-1] * state.B[:-1]))
            assert norm_sq - short >= tol * tol * norm_sq

    def test_exact_rank_recovery_with_oversized_block(self):
        dense, ratings = exact_rank_matrix(90, 70, r=5, seed=51)
        state = fixed_precision_qb(ratings, tol=1e-6, block_size=20, power=0, seed=0)
        assert state.rank == 5
        resid = np.linalg.norm(dense - state.Q @ state.B)
        assert resid <= 1e-6 * np.linalg.norm(dense)

    def test_zero_matrix_gives_rank_zero(self):
        ratings = SparseRatings.from_dense(np.zeros((12, 9)))
        state = fixed_precision_qb(ratings, tol=0.5, block_size=3)
        assert state.rank == 0
        assert state.err == 0.0
        assert state.Q.shape == (12, 0)
        assert state.B.shape == (0, 9)

    def test_parameter_validation(self):
        _, ratings = sparse_random(20, 25, 0.3, seed=52)
        with pytest.raises(ValueError):
            fixed_precision_qb(ratings, tol=0.0)
        with pytest.raises(ValueError):
            fixed_precision_qb(ratings, tol=1.0)
        with pytest.raises(ValueError):
            fixed_precision_qb(ratings, tol=0.5, block_size=0)
        with pytest.raises(ValueError):
            fixed_precision_qb(ratings, tol=0.5, block_size=21)
        with pytest.raises(ValueError):
            fixed_precision_qb(ratings, tol=0.5, power=-1)

    def test_rank_exhaustion_carries_state(self):
        _, ratings = sparse_random(30, 40, 0.5, seed=53)
        with pytest.raises(RankExhaustedError) as excinfo:
            fixed_precision_qb(ratings, tol=1e-9, block_size=8, power=0, seed=1)
        state = excinfo.value.state
        assert state is not None
        assert state.rank == 24


class TestBasicRsvd:
    def test_exact_rank_reconstruction(self):
        dense, ratings = exact_rank_matrix(80, 60, r=9, seed=60)
        triplet = basic_rsvd(ratings, k=9, power=1, seed=2)
        resid = np.linalg.norm(dense - triplet.reconstruct())
        assert resid <= 1e-8 * np.linalg.norm(dense)

    def test_singular_values_match_oracle_with_power(self):
        dense, ratings = decay_matrix(100, 80, base=0.7, seed=61)
        oracle = np.linalg.svd(dense, compute_uv=False)
        triplet = basic_rsvd(ratings, k=10, power=6, oversample=10, seed=3)
        rel = np.abs(triplet.s[:5] - oracle[:5]) / oracle[:5]
        assert rel.max() <= 1e-6

    def test_factors_orthonormal(self):
        _, ratings = sparse_random(70, 90, 0.1, seed=62)
        triplet = basic_rsvd(ratings, k=8, power=2, oversample=4, seed=4)
        assert np.linalg.norm(triplet.u.T @ triplet.u - np.eye(8)) <= 1e-10
        assert np.linalg.norm(triplet.v.T @ triplet.v - np.eye(8)) <= 1e-10
        assert np.all(np.diff(triplet.s) <= 0)

    def test_sketch_wider_than_matrix_rejected(self):
        _, ratings = sparse_random(20, 30, 0.3, seed=63)
        with pytest.raises(ValueError):
            basic_rsvd(ratings, k=15, oversample=10)

    def test_rank_deficient_sketch_raises(self):
        dense, ratings = exact_rank_matrix(40, 30, r=3, seed=64)
        with pytest.raises(RankDeficientError):
            basic_rsvd(ratings, k=8, seed=5)


class TestAdaptivePca:
    def test_frob_tolerance_met(self):
        for seed in range(3):
            dense, ratings = sparse_random(110, 160, 0.07, seed=70 + seed)
            triplet = adaptive_pca(
                ratings, FrobTolerance(0.6), block_size=12, passes=10, seed=seed
            )
            resid = np.linalg.norm(dense - triplet.reconstruct())
            assert resid <= 0.6 * np.linalg.norm(dense)

    def test_fixed_rank_values_match_oracle(self):
        dense, ratings = decay_matrix(100, 120, base=0.7, seed=71)
        oracle = np.linalg.svd(dense, compute_uv=False)
        triplet = adaptive_pca(ratings, FixedRank(10), block_size=5, passes=10, seed=6)
        assert triplet.k == 10
        rel = np.abs(triplet.s[:5] - oracle[:5]) / oracle[:5]
        assert rel.max() <= 1e-6

    def test_tall_matrix_transposed_internally(self):
        dense, ratings = exact_rank_matrix(150, 40, r=6, seed=72)
        triplet = adaptive_pca(
            ratings, FrobTolerance(1e-7), block_size=6, passes=10, seed=7
        )
        assert triplet.u.shape == (150, triplet.k)
        assert triplet.v.shape == (40, triplet.k)
        resid = np.linalg.norm(dense - triplet.reconstruct())
        assert resid <= 1e-7 * np.linalg.norm(dense)

    def test_custom_callable_criterion(self):
        _, ratings = sparse_random(90, 130, 0.1, seed=73)
        triplet = adaptive_pca(
            ratings, lambda state: state.blocks >= 3, block_size=7, passes=6, seed=8
        )
        assert triplet.k == 21

    def test_descending_order_and_orthonormal(self):
        _, ratings = sparse_random(90, 130, 0.1, seed=74)
        triplet = adaptive_pca(ratings, FixedRank(12), block_size=6, passes=8, seed=9)
        assert np.all(np.diff(triplet.s) <= 0)
        assert np.linalg.norm(triplet.u.T @ triplet.u - np.eye(12)) <= 1e-8
        assert np.linalg.norm(triplet.v.T @ triplet.v - np.eye(12)) <= 1e-8

    def test_pass_budget_validation(self):
        _, ratings = sparse_random(30, 30, 0.3, seed=75)
        with pytest.raises(ValueError):
            adaptive_pca(ratings, FixedRank(4), passes=2)
        with pytest.raises(ValueError):
            adaptive_pca(ratings, FixedRank(4), block_size=0)

    def test_unreachable_rank_exhausts(self):
        _, ratings = sparse_random(30, 40, 0.5, seed=76)
        with pytest.raises(RankExhaustedError):
            adaptive_pca(ratings, FixedRank(25), block_size=10, passes=4, seed=10)

    def test_unreachable_tolerance_exhausts(self):
        _, ratings = sparse_random(30, 40, 0.5, seed=77)
        with pytest.raises(RankExhaustedError):
            adaptive_pca(ratings, FrobTolerance(1e-9), block_size=8, passes=4, seed=11)

    def test_rank_beyond_numerical_rank_near_singular(self):
        _, ratings = exact_rank_matrix(60, 50, r=3, seed=78)
        with pytest.raises(NearSingularError):
            adaptive_pca(ratings, FixedRank(10), block_size=10, passes=6, seed=12)


class TestCriteria:
    def test_fixed_rank_fires_at_rank(self):
        crit = FixedRank(10)
        _, ratings = sparse_random(40, 50, 0.2, seed=80)
        gen = qb_power_blocks(ratings, 5, 0, GaussianStream(0))
        first = next(gen)
        assert first.rank == 5
        assert not crit(first)
        second = next(gen)
        assert second.rank == 10
        assert crit(second)

    def test_frob_tolerance_uses_relative_error(self):
        crit = FrobTolerance(0.5)
        _, ratings = sparse_random(40, 50, 0.2, seed=81)
        states = list(qb_power_blocks(ratings, 10, 1, GaussianStream(0)))
        fired = [crit(s) for s in states]
        # once fired, stays fired as err only decreases
        if True in fired:
            first_true = fired.index(True)
            assert all(fired[first_true:])

    def test_validation(self):
        with pytest.raises(ValueError):
            FixedRank(0)
        with pytest.raises(ValueError):
            FrobTolerance(0.0)
        with pytest.raises(ValueError):
            FrobTolerance(1.0)
