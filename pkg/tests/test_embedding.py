import tracemalloc

import numpy as np
import pytest

from snacks.data_io import Dataset
from snacks.embedding import (
    embed,
    embed_batch,
    fit_embedding,
    psd_pinv_sqrt,
    sample_landmarks,
)
from snacks.errors import DataError, DegenerateMatrixError, NumericalError
from snacks.kernels import KernelSpec, gram_block

from .conftest import random_dataset

RBF1 = KernelSpec("rbf", sigma=1.0)


def test_landmarks_all_when_m_equals_n():
    assert sample_landmarks(7, 7, seed=3).tolist() == list(range(7))
    assert sample_landmarks(1, 1, seed=0).tolist() == [0]


def test_landmarks_deterministic_and_distinct():
    a = sample_landmarks(1000, 50, seed=11)
    assert np.array_equal(a, sample_landmarks(1000, 50, seed=11))
    assert len(set(a.tolist())) == 50
    with pytest.raises(ValueError):
        sample_landmarks(5, 6, seed=0)


def test_pinv_sqrt_identity():
    T, spec = psd_pinv_sqrt(np.eye(3), 1e-12)
    assert np.array_equal(T, np.eye(3))
    assert spec.tolist() == [1.0, 1.0, 1.0]


def test_pinv_sqrt_drops_zero_eigenvalue():
    T, spec = psd_pinv_sqrt(np.diag([4.0, 0.0]), 1e-12)
    assert T.tolist() == [[0.5, 0.0]]
    assert spec.tolist() == [4.0, 0.0]


def test_pinv_sqrt_low_rank():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((20, 12))
    M = A @ A.T
    T, spec = psd_pinv_sqrt(M, 1e-12)
    assert T.shape == (12, 20)
    assert np.linalg.norm(T @ M @ T.T - np.eye(12)) <= 1e-8
    assert np.all(np.diff(spec) <= 0)


def test_pinv_sqrt_clamps_negative_eigenvalues():
    M = np.diag([1.0, -1e-14, 0.5])
    T, spec = psd_pinv_sqrt(M, 1e-12)
    assert T.shape == (2, 3)
    assert spec.min() == 0.0


def test_pinv_sqrt_errors():
    with pytest.raises(DegenerateMatrixError):
        psd_pinv_sqrt(np.zeros((3, 3)))
    with pytest.raises(NumericalError):
        psd_pinv_sqrt(np.full((2, 2), np.nan))


def test_rank_monotone_in_cutoff():
    ds = random_dataset(60, 2, seed=3)
    K = gram_block(RBF1, ds.X, ds.X)
    ranks = [psd_pinv_sqrt(K, c)[0].shape[0] for c in (1e-14, 1e-12, 1e-9, 1e-6, 1e-3, 1e-1)]
    assert ranks == sorted(ranks, reverse=True)
    spectrum = psd_pinv_sqrt(K, 1e-6)[1]
    assert ranks[3] == int(np.sum(spectrum > 1e-6 * spectrum[0]))


def test_single_landmark():
    ds = random_dataset(5, 3, seed=1)
    e = fit_embedding(RBF1, ds, m=1, seed=0)
    assert e.transform.tolist() == [[1.0]]
    x_land = e.landmarks
    assert embed(e, x_land).tolist() == [1.0]
    x = ds.X[3]
    assert embed(e, x)[0] == gram_block(RBF1, e.landmarks, x)[0, 0]


def test_exact_recovery_m_equals_n():
    ds = random_dataset(30, 4, seed=2)
    e = fit_embedding(RBF1, ds, m=30, seed=0)
    X = embed_batch(e, ds)
    K = gram_block(RBF1, ds.X, ds.X)
    assert e.rank == 30
    assert np.linalg.norm(X @ X.T - K) <= 1e-8 * np.linalg.norm(K)


def test_fit_contract():
    ds = random_dataset(100, 5, seed=4)
    e = fit_embedding(RBF1, ds, m=40, seed=1)
    assert e.rank <= e.m == 40
    assert np.all(np.diff(e.eigen_spectrum) <= 0)
    K = gram_block(RBF1, e.landmarks, e.landmarks)
    T = e.transform
    assert np.linalg.norm(T @ K @ T.T - np.eye(e.rank)) <= 1e-8 * np.sqrt(e.rank)


def test_landmarks_are_copied():
    ds = random_dataset(20, 3, seed=4)
    e = fit_embedding(RBF1, ds, m=5, seed=1)
    before = e.landmarks.toarray().copy()
    ds.X.data[:] = 0.0
    assert np.array_equal(e.landmarks.toarray(), before)


def test_inner_products_match_pinv_oracle():
    ds = random_dataset(200, 3, seed=6)
    e = fit_embedding(RBF1, ds, m=25, seed=2)
    pts = random_dataset(20, 3, seed=7)
    E = embed_batch(e, pts)
    C = gram_block(RBF1, pts.X, e.landmarks)
    Kmm = gram_block(RBF1, e.landmarks, e.landmarks)
    oracle = C @ np.linalg.pinv(Kmm, rcond=1e-12, hermitian=True) @ C.T
    assert np.max(np.abs(E @ E.T - oracle)) <= 1e-8


def test_embedded_norm_below_kernel_diagonal():
    ds = random_dataset(300, 5, seed=8)
    e = fit_embedding(RBF1, ds, m=60, seed=3)
    pts = random_dataset(500, 5, seed=9, scale=2.0)
    sq = np.sum(embed_batch(e, pts) ** 2, axis=1)
    assert np.all(sq <= 1.0 + 1e-8)


def test_landmark_self_consistency():
    ds = random_dataset(100, 3, seed=10)
    e = fit_embedding(RBF1, ds, m=20, seed=4)
    L = embed_batch(e, e.landmarks)
    K = gram_block(RBF1, e.landmarks, e.landmarks)
    assert np.linalg.norm(L @ L.T - K) <= 1e-8 * np.linalg.norm(K)


def test_batch_rows_match_single_embed_bitwise():
    ds = random_dataset(300, 10, seed=11, density=0.4)
    e = fit_embedding(RBF1, ds, m=50, seed=5)
    B = embed_batch(e, ds, chunk=128)
    for i in range(0, ds.n, 13):
        assert np.array_equal(embed(e, ds.X[i]), B[i])
    assert np.array_equal(embed_batch(e, ds, chunk=64), B)


def test_empty_batch():
    ds = random_dataset(10, 3, seed=1)
    e = fit_embedding(RBF1, ds, m=4, seed=0)
    empty = ds.take([])
    assert embed_batch(e, empty).shape == (0, e.rank)


def test_feature_space_mismatch():
    ds = random_dataset(10, 3, seed=1)
    e = fit_embedding(RBF1, ds, m=4, seed=0)
    with pytest.raises(DataError):
        embed(e, np.ones(5))


def test_large_batch_memory_is_linear_in_n_times_m():
    ds = random_dataset(10_000, 10, seed=12)
    e = fit_embedding(KernelSpec("rbf", sigma=3.0), ds, m=800, seed=0)
    tracemalloc.start()
    out = embed_batch(e, ds)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    assert out.shape == (10_000, e.rank)
    full_kernel = 8 * ds.n * ds.n
    assert peak < 3 * out.nbytes + 8 * 4096 * 800 * 3
    assert peak < full_kernel / 4
