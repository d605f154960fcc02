import numpy as np
import pytest
from dataclasses import replace

from snacks.errors import (
    ModelChecksumError,
    ModelFormatError,
    ModelTruncatedError,
    ModelVersionError,
)
from snacks.kernels import KernelSpec, gram_block
from snacks.model import (
    FORMAT_VERSION,
    SvmModel,
    TrainConfig,
    decision_function,
    dumps,
    load_model,
    loads,
    predict,
    save_model,
    train,
)
from snacks.optim import SolverConfig
from snacks.reference import make_blobs, make_two_moons

from .conftest import random_dataset

TINY_CFG = TrainConfig(
    kernel=KernelSpec("rbf", sigma=1.0),
    m=8,
    lam=0.1,
    solver=SolverConfig(stages=10, inner_iters=10**4, seed=42),
    seed=42,
)


@pytest.fixture(scope="module")
def tiny_model():
    return train(TINY_CFG, make_blobs(32, seed=42), name="blobs")


def test_blobs_are_separable_and_fit_exactly(tiny_model):
    ds = make_blobs(32, seed=42)
    # the two clouds are split by the line x0 + x1 = 0
    s = np.asarray(ds.X.sum(axis=1)).ravel()
    assert np.all(np.sign(s) == -ds.y)
    assert tiny_model.provenance["train_error"] == 0.0
    assert np.all(predict(tiny_model, ds) == ds.y)


def test_training_is_byte_deterministic(tiny_model):
    again = train(TINY_CFG, make_blobs(32, seed=42), name="blobs")
    assert dumps(again) == dumps(tiny_model)


def test_provenance_and_timings(tiny_model):
    p = tiny_model.provenance
    assert p["dataset"] == "blobs" and p["n_train"] == 32 and p["seed"] == 42
    assert set(tiny_model.timings) == {"embed_seconds", "solve_seconds"}


def test_m_larger_than_n():
    with pytest.raises(ValueError):
        train(replace(TINY_CFG, m=33), make_blobs(32, seed=42))


def test_zero_weights_give_zero_scores(tiny_model):
    zero = SvmModel(tiny_model.embedding, np.zeros(tiny_model.embedding.rank), TINY_CFG)
    assert np.all(decision_function(zero, make_blobs(10, seed=1)) == 0.0)
    assert np.all(predict(zero, make_blobs(10, seed=1)) == 1.0)


def test_decision_is_linear_in_w(tiny_model):
    pts = make_blobs(50, seed=3)
    double = SvmModel(tiny_model.embedding, 2 * tiny_model.w, TINY_CFG)
    assert np.array_equal(decision_function(double, pts), 2 * decision_function(tiny_model, pts))


def test_decision_matches_kernel_expansion(tiny_model):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-4, 4, size=(100, 2))
    b = tiny_model.embedding.decision_coefficients(tiny_model.w)
    expansion = gram_block(tiny_model.embedding.spec, pts, tiny_model.embedding.landmarks) @ b
    assert np.max(np.abs(decision_function(tiny_model, pts) - expansion)) <= 1e-10


def test_landmark_scores_finite(tiny_model):
    assert np.all(np.isfinite(decision_function(tiny_model, tiny_model.embedding.landmarks)))


def test_single_and_batch_agree(tiny_model):
    pts = make_blobs(20, seed=9)
    batch_scores = decision_function(tiny_model, pts)
    batch = predict(tiny_model, pts)
    for i in range(pts.n):
        x = pts.X[i].toarray().ravel()
        assert decision_function(tiny_model, x) == batch_scores[i]
        assert predict(tiny_model, x) == batch[i]


def test_tie_maps_to_positive(tiny_model, monkeypatch):
    import snacks.model as model_mod

    monkeypatch.setattr(model_mod, "decision_function",
                        lambda m, X: np.array([0.3, -0.3, 0.0]))
    assert model_mod.predict(tiny_model, None).tolist() == [1.0, -1.0, 1.0]


def test_round_trip_exact(tiny_model, tmp_path):
    path = tmp_path / "m.snacks"
    save_model(tiny_model, path)
    back = load_model(path)
    pts = make_blobs(200, seed=5)
    assert np.array_equal(decision_function(back, pts), decision_function(tiny_model, pts))
    assert back.provenance == tiny_model.provenance
    assert back.config == tiny_model.config
    assert dumps(back) == dumps(tiny_model)


def test_round_trip_sparse_high_dim():
    ds = random_dataset(300, 120, seed=3, density=0.1)
    cfg = TrainConfig(KernelSpec("rbf", sigma=1.5), m=50, lam=1e-3,
                      solver=SolverConfig(stages=5, inner_iters=500))
    model = train(cfg, ds)
    back = loads(dumps(model))
    assert np.array_equal(decision_function(back, ds), decision_function(model, ds))


def test_corrupted_byte(tiny_model):
    blob = bytearray(dumps(tiny_model))
    blob[len(blob) // 2] ^= 0x01
    with pytest.raises(ModelChecksumError):
        loads(bytes(blob))


def test_version_mismatch(tiny_model):
    blob = bytearray(dumps(tiny_model))
    blob[8:12] = (FORMAT_VERSION + 1).to_bytes(4, "little")
    with pytest.raises(ModelVersionError, match="version 2"):
        loads(bytes(blob))
    blob[8:12] = (0).to_bytes(4, "little")
    with pytest.raises(ModelVersionError):
        loads(bytes(blob))


def test_truncated(tiny_model):
    blob = dumps(tiny_model)
    for cut in (10, len(blob) // 3, len(blob) - 1):
        with pytest.raises(ModelTruncatedError):
            loads(blob[:cut])


def test_bad_magic_and_trailing(tiny_model):
    blob = dumps(tiny_model)
    with pytest.raises(ModelFormatError):
        loads(b"NOTAMODEL" + blob[9:])
    with pytest.raises(ModelFormatError):
        loads(blob + b"\x00")


def test_full_problem_when_m_equals_n():
    cvxopt = pytest.importorskip("cvxopt")
    ds = make_two_moons(40, noise=0.25, seed=4)
    spec = KernelSpec("rbf", sigma=0.5)
    lam = 0.05
    cfg = TrainConfig(spec, m=40, lam=lam,
                      solver=SolverConfig(stages=12, inner_iters=2 * 10**4, seed=1))
    model = train(cfg, ds)
    # kernel-form problem over alpha: mean hinge([K alpha]_i) + lam/2 alpha' K alpha
    K = gram_block(spec, ds.X, ds.X)
    n, y = ds.n, ds.y
    P = np.zeros((2 * n, 2 * n))
    P[:n, :n] = lam * K
    q = np.r_[np.zeros(n), np.ones(n) / n]
    G = np.block([[np.zeros((n, n)), -np.eye(n)], [-(y[:, None] * K), -np.eye(n)]])
    h = np.r_[np.zeros(n), -np.ones(n)]
    opts = {"show_progress": False, "abstol": 1e-12, "reltol": 1e-12, "feastol": 1e-12}
    sol = cvxopt.solvers.qp(*[cvxopt.matrix(a) for a in (P, q, G, h)], options=opts)
    alpha = np.array(sol["x"]).ravel()[:n]
    f = K @ alpha
    full_opt = np.mean(np.maximum(0, 1 - y * f)) + 0.5 * lam * alpha @ K @ alpha
    assert model.embedding.rank == 40
    assert abs(model.provenance["final_objective"] - full_opt) <= 1e-4
