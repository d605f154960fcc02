"""Nyström kernel data embedding.

A point ``x`` is mapped to ``T @ (K(l_1, x), ..., K(l_m, x))`` where the
``l_j`` are landmark samples and ``T`` is the pseudo-inverse square root of
the landmark Gram matrix restricted to its numerical range. Inner products
of embedded points reproduce the Nyström approximation of the kernel.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse

from .errors import DataError, DegenerateMatrixError, NumericalError
from .kernels import KernelSpec, _as_csr, gram_block, sq_norms

__all__ = [
    "NystromEmbedding",
    "sample_landmarks",
    "psd_pinv_sqrt",
    "fit_embedding",
    "embed",
    "embed_batch",
    "DEFAULT_REL_CUTOFF",
]

DEFAULT_REL_CUTOFF = 1e-12

# Rows are pushed through the transform in zero-padded blocks of this many
# rows so every row goes through an identically shaped GEMM call; this keeps
# single-point and batched embeddings bitwise equal.
_BLOCK = 64


def sample_landmarks(n, m, seed):
    """``m`` distinct indices drawn uniformly from ``range(n)``, sorted."""
    if m < 1 or m > n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False))


def psd_pinv_sqrt(M, rel_cutoff=DEFAULT_REL_CUTOFF):
    """Pseudo-inverse square root of a symmetric PSD matrix.

    Negative eigenvalues are clamped to zero, and only eigenpairs above
    ``rel_cutoff * max_eigenvalue`` are kept, so that ``T @ M @ T.T`` is the
    identity of the retained rank.

    Returns
    -------
    T : ndarray, shape (r, m)
    spectrum : ndarray, shape (m,)
        Clamped eigenvalues in non-increasing order.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    M = 0.5 * (M + M.T)
    try:
        evals, evecs = scipy.linalg.eigh(M)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    if not np.all(np.isfinite(evals)):
        raise NumericalError("eigendecomposition produced non-finite values")
    order = np.argsort(-evals, kind="stable")
    evals = np.maximum(evals[order], 0.0)
    evecs = evecs[:, order]
    # sign convention: largest-magnitude component of each eigenvector is positive
    pivot = np.argmax(np.abs(evecs), axis=0)
    signs = np.sign(evecs[pivot, np.arange(evecs.shape[1])])
    signs[signs == 0] = 1.0
    evecs = evecs * signs
    top = evals[0] if evals.size else 0.0
    keep = evals > rel_cutoff * top
    if top <= 0 or not keep.any():
        raise DegenerateMatrixError("all eigenvalues are below the cutoff")
    T = evecs[:, keep].T / np.sqrt(evals[keep])[:, None]
    return np.ascontiguousarray(T), evals


@dataclass(eq=False)
class NystromEmbedding:
    """Fitted embedding; self-contained (landmarks are copied in)."""

    spec: KernelSpec
    landmarks: sparse.csr_matrix
    transform: np.ndarray
    eigen_spectrum: np.ndarray
    rel_cutoff: float
    landmark_indices: np.ndarray = None

    def __post_init__(self):
        self.landmarks = sparse.csr_matrix(self.landmarks, dtype=np.float64)
        self._landmarks_dense = self.landmarks.toarray()
        self._landmarks_sq = sq_norms(self.landmarks)
        self._transform_t = np.ascontiguousarray(self.transform.T)

    @property
    def m(self):
        return self.landmarks.shape[0]

    @property
    def rank(self):
        return self.transform.shape[0]

    @property
    def dim(self):
        return self.landmarks.shape[1]

    def kernel_columns(self, X):
        """Kernel values against the landmarks, shape (n, m)."""
        X = _as_csr(X)
        if X.shape[1] > self.dim:
            raise DataError(
                f"samples have {X.shape[1]} features, embedding was fit on {self.dim}"
            )
        X = sparse.csr_matrix((X.data, X.indices, X.indptr), shape=(X.shape[0], self.dim))
        return gram_block(
            self.spec,
            X,
            self.landmarks,
            B_dense=self._landmarks_dense,
            B_sq=self._landmarks_sq,
        )

    def decision_coefficients(self, w):
        """Kernel expansion weights ``b = T.T @ w`` over the landmarks."""
        return self.transform.T @ np.asarray(w, dtype=np.float64)


def fit_embedding(spec, ds, m, seed, rel_cutoff=DEFAULT_REL_CUTOFF):
    """Sample ``m`` landmarks from ``ds`` and build the embedding."""
    X = ds.X if hasattr(ds, "X") else _as_csr(ds)
    idx = sample_landmarks(X.shape[0], m, seed)
    L = sparse.csr_matrix(X[idx], dtype=np.float64, copy=True)
    K_mm = gram_block(spec, L, L)
    T, spectrum = psd_pinv_sqrt(K_mm, rel_cutoff)
    return NystromEmbedding(spec, L, T, spectrum, float(rel_cutoff), idx)


def _transform_rows(e, C):
    n = C.shape[0]
    out = np.empty((n, e.rank), dtype=np.float64)
    buf = np.zeros((_BLOCK, e.m), dtype=np.float64)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        buf[: stop - start] = C[start:stop]
        buf[stop - start:] = 0.0
        out[start:stop] = (buf @ e._transform_t)[: stop - start]
    return out


def embed_batch(e, X, chunk=4096):
    """Embed every row of ``X`` (Dataset, CSR or dense); returns (n, r).

    Peak extra memory is O(chunk * m); the full kernel matrix is never built.
    """
    X = X.X if hasattr(X, "X") else _as_csr(X)
    n = X.shape[0]
    out = np.empty((n, e.rank), dtype=np.float64)
    chunk = max(_BLOCK, chunk - chunk % _BLOCK)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        out[start:stop] = _transform_rows(e, e.kernel_columns(X[start:stop]))
    return out


def embed(e, x):
    """Embed a single sample; bitwise equal to the matching :func:`embed_batch` row."""
    X = _as_csr(x)
    if X.shape[0] != 1:
        raise ValueError("embed expects a single sample")
    return embed_batch(e, X)[0]
