"""Kernel functions and dense Gram blocks between sparse sample sets."""
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

__all__ = ["KernelSpec", "kernel_eval", "gram_block", "sq_norms"]

_FAMILIES = ("rbf", "linear", "polynomial")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and parameters.

    RBF uses ``exp(-||x - y||^2 / (2 sigma^2))``; ``gamma = 1 / (2 sigma^2)``
    is accepted through :meth:`from_gamma`.
    """

    family: str = "rbf"
    sigma: float = 1.0
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self):
        fam = self.family.lower()
        if fam == "poly":
            fam = "polynomial"
        if fam not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if fam == "rbf" and not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"RBF bandwidth must be positive, got {self.sigma}")
        if fam == "polynomial" and int(self.degree) < 1:
            raise ValueError(f"polynomial degree must be >= 1, got {self.degree}")
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "coef0", float(self.coef0))

    @classmethod
    def from_gamma(cls, gamma):
        if not gamma > 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        return cls("rbf", sigma=math.sqrt(1.0 / (2.0 * gamma)))

    @property
    def gamma(self):
        return 1.0 / (2.0 * self.sigma**2)

    def to_dict(self):
        return {
            "family": self.family,
            "sigma": self.sigma,
            "degree": self.degree,
            "coef0": self.coef0,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], d["sigma"], d["degree"], d["coef0"])


def _as_csr(A):
    if sparse.issparse(A):
        return sparse.csr_matrix(A, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[None, :]
    return sparse.csr_matrix(A)


def _match_width(A, B):
    d = max(A.shape[1], B.shape[1])
    if A.shape[1] != d:
        A = sparse.csr_matrix((A.data, A.indices, A.indptr), shape=(A.shape[0], d))
    if B.shape[1] != d:
        B = sparse.csr_matrix((B.data, B.indices, B.indptr), shape=(B.shape[0], d))
    return A, B


def sq_norms(A):
    """Row-wise squared norms, accumulated in the same order as :func:`gram_block` dots."""
    A = _as_csr(A)
    return np.asarray(A.multiply(A) @ np.ones((A.shape[1], 1))).reshape(-1)


def gram_block(spec, A, B, A_sq=None, B_dense=None, B_sq=None):
    """Dense kernel matrix between the rows of ``A`` and ``B``.

    Inputs may be CSR matrices, dense 2-D arrays, or single dense vectors.
    Each output entry only depends on its own pair of rows, so any row
    subset of ``A`` yields bit-identical entries. ``A_sq``, ``B_dense`` and
    ``B_sq`` let callers reuse precomputed per-sample quantities.
    """
    A = _as_csr(A)
    B = _as_csr(B)
    A, B = _match_width(A, B)
    if B_dense is None:
        B_dense = B.toarray()
    dots = np.asarray(A @ B_dense.T)
    if dots.ndim == 1:
        dots = dots.reshape(A.shape[0], B.shape[0])
    if spec.family == "linear":
        return dots
    if spec.family == "polynomial":
        return (dots + spec.coef0) ** spec.degree
    if A_sq is None:
        A_sq = sq_norms(A)
    if B_sq is None:
        B_sq = sq_norms(B)
    d2 = A_sq[:, None] + B_sq[None, :] - 2.0 * dots
    np.maximum(d2, 0.0, out=d2)
    d2 *= -1.0 / (2.0 * spec.sigma**2)
    return np.exp(d2)


def kernel_eval(spec, x, y):
    """Kernel value between two samples (same code path as :func:`gram_block`)."""
    return float(gram_block(spec, x, y)[0, 0])
