"""Small synthetic problems with known structure, used by tests and demos."""
import numpy as np
from scipy import sparse

from .data_io import Dataset
from .embedding import embed_batch, fit_embedding
from .kernels import KernelSpec
from .optim import Objective

__all__ = ["make_blobs", "make_two_moons", "tiny_reference"]


def make_blobs(n=32, seed=42, centers=((-1.5, -1.5), (1.5, 1.5)), scale=0.5):
    """Two isotropic Gaussian blobs, the first labelled +1, the second -1."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    n_pos = n // 2
    labels = np.concatenate([np.ones(n_pos), -np.ones(n - n_pos)])
    means = np.where(labels[:, None] > 0, centers[0], centers[1])
    X = means + scale * rng.standard_normal((n, centers.shape[1]))
    return Dataset(sparse.csr_matrix(X), labels)


def make_two_moons(n=2000, noise=0.15, seed=0, label_noise=0.0):
    """Interleaved half circles; not linearly separable in input space."""
    rng = np.random.default_rng(seed)
    n_pos = n // 2
    t = rng.uniform(0, np.pi, size=n)
    X = np.empty((n, 2))
    X[:n_pos, 0] = np.cos(t[:n_pos])
    X[:n_pos, 1] = np.sin(t[:n_pos])
    X[n_pos:, 0] = 1 - np.cos(t[n_pos:])
    X[n_pos:, 1] = 0.5 - np.sin(t[n_pos:])
    X += noise * rng.standard_normal(X.shape)
    y = np.concatenate([np.ones(n_pos), -np.ones(n - n_pos)])
    if label_noise > 0:
        flip = rng.uniform(size=n) < label_noise
        y[flip] = -y[flip]
    return Dataset(sparse.csr_matrix(X), y)


def tiny_reference():
    """The 32-point blob instance: RBF sigma=1, m=8 landmarks, oracle lambda 0.1.

    Returns ``(dataset, embedding, objective)``.
    """
    ds = make_blobs(32, seed=42)
    emb = fit_embedding(KernelSpec("rbf", sigma=1.0), ds, m=8, seed=42)
    obj = Objective(embed_batch(emb, ds), ds.y, 0.1)
    return ds, emb, obj
