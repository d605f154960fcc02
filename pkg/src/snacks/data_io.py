"""LIBSVM text I/O, label handling, and deterministic splits.

Feature indices are 1-based on disk and 0-based in memory; samples are
stored as rows of a CSR matrix.
"""
import io
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DataError, ParseError

__all__ = [
    "Dataset",
    "FoldAssignment",
    "parse_libsvm",
    "read_libsvm",
    "write_libsvm",
    "binarize_labels",
    "ensure_binary",
    "split_kfold",
    "subsample",
]


@dataclass(eq=False)
class Dataset:
    """Labeled sparse samples.

    Attributes
    ----------
    X : scipy.sparse.csr_matrix, shape (n, dim)
        One sample per row, column j holds feature index j + 1 of the file.
    y : ndarray of float64, shape (n,)
        Labels. Raw values are kept as read; use :func:`ensure_binary` or
        :func:`binarize_labels` to get {-1, +1}.
    """

    X: sparse.csr_matrix
    y: np.ndarray

    def __post_init__(self):
        self.X = sparse.csr_matrix(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError(
                f"{self.X.shape[0]} samples but {self.y.shape[0]} labels"
            )

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.X[idx], self.y[idx])

    def with_dim(self, dim):
        """Return a copy whose feature space has exactly ``dim`` columns."""
        if dim < self.dim:
            raise DataError(
                f"dataset uses {self.dim} features, cannot shrink to {dim}"
            )
        X = sparse.csr_matrix(
            (self.X.data, self.X.indices, self.X.indptr), shape=(self.n, dim)
        )
        return Dataset(X, self.y.copy())

    def equals(self, other):
        """Exact equality of shape, sparsity pattern, values and labels."""
        a, b = self.X, other.X
        return (
            a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
            and np.array_equal(self.y, other.y)
        )


def _lines(text):
    if isinstance(text, (bytes, bytearray, memoryview)):
        text = bytes(text).decode("utf-8")
    elif hasattr(text, "read"):
        text = text.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    return text.split("\n")


def parse_libsvm(text, n_features=None):
    """Parse LIBSVM sparse text into a :class:`Dataset`.

    Parameters
    ----------
    text : str, bytes or binary/text file object
        Each nonempty line reads ``<label> <idx>:<val> ...`` with strictly
        increasing 1-based indices. ``\\r\\n`` endings are accepted.
    n_features : int, optional
        Force the feature dimension. Must be at least the largest index seen.

    Raises
    ------
    ParseError
        On malformed lines, non-numeric tokens, or non-increasing indices.
    """
    labels = []
    indptr = [0]
    indices = []
    values = []
    max_idx = 0
    for line_no, line in enumerate(_lines(text), start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(line_no, f"bad label {tokens[0]!r}") from None
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(line_no, f"expected idx:val, got {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(line_no, f"non-numeric token {tok!r}") from None
            if idx < 1:
                raise ParseError(line_no, f"feature index {idx} < 1")
            if idx == prev:
                raise ParseError(line_no, f"duplicate feature index {idx}")
            if idx < prev:
                raise ParseError(
                    line_no, f"feature indices not increasing ({prev} then {idx})"
                )
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        max_idx = max(max_idx, prev)
        indptr.append(len(indices))

    dim = max_idx
    if n_features is not None:
        if n_features < max_idx:
            raise DataError(
                f"n_features={n_features} but index {max_idx} present"
            )
        dim = n_features
    X = sparse.csr_matrix(
        (
            np.asarray(values, dtype=np.float64),
            np.asarray(indices, dtype=np.int32),
            np.asarray(indptr, dtype=np.int64),
        ),
        shape=(len(labels), dim),
    )
    return Dataset(X, np.asarray(labels, dtype=np.float64))


def read_libsvm(path, n_features=None):
    with open(os.fspath(path), "rb") as fh:
        return parse_libsvm(fh.read(), n_features=n_features)


def _format_label(v):
    if v == 1.0:
        return "+1"
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_libsvm(ds):
    """Serialize ``ds`` to LIBSVM text (UTF-8 bytes).

    Floats use the shortest representation that parses back to the same
    double, so ``parse_libsvm(write_libsvm(ds))`` reproduces ``ds`` exactly
    (up to the feature dimension, which is re-derived from the largest index).
    """
    out = io.StringIO()
    X = ds.X
    for i in range(ds.n):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        parts = [_format_label(ds.y[i])]
        parts.extend(
            f"{j + 1}:{float(v)!r}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi])
        )
        out.write(" ".join(parts))
        out.write("\n")
    return out.getvalue().encode("utf-8")


def binarize_labels(ds, positive):
    """Map labels equal to ``positive`` to +1 and everything else to -1."""
    hit = ds.y == positive
    if not hit.any():
        warnings.warn(
            f"positive label {positive!r} does not occur in the dataset",
            RuntimeWarning,
            stacklevel=2,
        )
    y = np.where(hit, 1.0, -1.0)
    return Dataset(ds.X.copy(), y)


def ensure_binary(ds, map_01=False):
    """Validate {-1, +1} labels, optionally remapping a {0, 1} label set.

    Raises DataError when labels fall outside the accepted set.
    """
    present = set(np.unique(ds.y).tolist())
    if present <= {-1.0, 1.0}:
        return ds
    if map_01 and present <= {0.0, 1.0}:
        return Dataset(ds.X, np.where(ds.y == 1.0, 1.0, -1.0))
    raise DataError(f"labels must be in {{-1, +1}}, found {sorted(present)}")


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    fold_of: np.ndarray
    k: int
    seed: int

    @property
    def n(self):
        return self.fold_of.shape[0]

    def sizes(self):
        return np.bincount(self.fold_of, minlength=self.k)

    def split(self, fold):
        """Return ``(train_idx, test_idx)`` for the given held-out fold."""
        test = np.flatnonzero(self.fold_of == fold)
        train = np.flatnonzero(self.fold_of != fold)
        return train, test

    def __iter__(self):
        for f in range(self.k):
            yield self.split(f)


def split_kfold(n, k, seed):
    """Random balanced assignment of ``n`` items into ``k`` folds."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % k
    return FoldAssignment(fold_of, k, seed)


def subsample(ds, n_keep, seed):
    """Uniform subset of ``n_keep`` samples without replacement, original order kept."""
    if n_keep < 0 or n_keep > ds.n:
        raise ValueError(f"cannot keep {n_keep} of {ds.n} samples")
    idx = np.sort(np.random.default_rng(seed).choice(ds.n, size=n_keep, replace=False))
    return ds.take(idx)
