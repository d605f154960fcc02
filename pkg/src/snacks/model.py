"""Training pipeline, prediction and model persistence.

Model file layout (all integers little-endian)::

    offset  size      field
    0       8         magic b"SNACKSVM"
    8       4         u32 format version
    12      4         u32 header length H
    16      8         u64 total file length
    24      H         header, UTF-8 JSON (sorted keys)
    24+H    8         u64 landmark block length L
    32+H    L         landmarks as LIBSVM rows (label 0, 1-based indices)
    ...     8*r*m     transform T, row-major float64 ("<f8")
    ...     8*m       eigenvalue spectrum, float64
    ...     8*r       weight vector w, float64
    end-32  32        SHA-256 of every preceding byte

The header stores the kernel, ``m``, ``r``, ``dim``, ``lambda``,
``rel_cutoff``, the training configuration and provenance.
"""
import hashlib
import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .data_io import Dataset, ensure_binary, parse_libsvm, write_libsvm
from .embedding import DEFAULT_REL_CUTOFF, NystromEmbedding, embed_batch, fit_embedding
from .errors import (
    ModelChecksumError,
    ModelFormatError,
    ModelTruncatedError,
    ModelVersionError,
)
from .kernels import KernelSpec
from .metrics import classification_error
from .optim import Objective, SolverConfig, solve_snacks

__all__ = [
    "TrainConfig",
    "SvmModel",
    "train",
    "decision_function",
    "predict",
    "save_model",
    "load_model",
    "dumps",
    "loads",
    "FORMAT_VERSION",
]

MAGIC = b"SNACKSVM"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIIQ")
_U64 = struct.Struct("<Q")
_DIGEST = 32
_SCORE_ROWS = 8192


@dataclass(frozen=True)
class TrainConfig:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    m: int = 800
    lam: float = 1e-4
    solver: SolverConfig = field(default_factory=SolverConfig)
    rel_cutoff: float = DEFAULT_REL_CUTOFF
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.rel_cutoff >= 0:
            raise ValueError(f"rel_cutoff must be >= 0, got {self.rel_cutoff}")

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "m": self.m,
            "lambda": self.lam,
            "solver": self.solver.to_dict(),
            "rel_cutoff": self.rel_cutoff,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kernel=KernelSpec.from_dict(d["kernel"]),
            m=d["m"],
            lam=d["lambda"],
            solver=SolverConfig.from_dict(d["solver"]),
            rel_cutoff=d["rel_cutoff"],
            seed=d["seed"],
        )


@dataclass(eq=False)
class SvmModel:
    embedding: NystromEmbedding
    w: np.ndarray
    config: TrainConfig
    provenance: dict = field(default_factory=dict)
    # wall-clock timings; reported but never serialized so that model files
    # stay byte-identical across identical runs
    timings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=np.float64)
        if self.w.shape != (self.embedding.rank,):
            raise ValueError(
                f"weight vector of length {self.w.shape} does not match rank "
                f"{self.embedding.rank}"
            )

    def decision_function(self, X):
        return decision_function(self, X)

    def predict(self, X):
        return predict(self, X)


def train(cfg, train_set, name="", trace_out=None):
    """Fit the embedding on ``train_set``, embed it, and run the staged solver.

    ``trace_out``, if a list, receives the solver's :class:`SolveTrace`.
    """
    ds = ensure_binary(train_set)
    if cfg.m > ds.n:
        raise ValueError(f"m={cfg.m} exceeds the {ds.n} training samples")
    t0 = time.perf_counter()
    emb = fit_embedding(cfg.kernel, ds, cfg.m, cfg.seed, cfg.rel_cutoff)
    X = embed_batch(emb, ds)
    t1 = time.perf_counter()
    obj = Objective(X, ds.y, cfg.lam)
    trace = solve_snacks(obj, cfg.solver)
    t2 = time.perf_counter()
    if trace_out is not None:
        trace_out.append(trace)
    train_err = classification_error(_sign(_rowdot(X, trace.w)), ds.y)
    provenance = {
        "dataset": name,
        "n_train": ds.n,
        "seed": cfg.seed,
        "solver_seed": cfg.solver.seed,
        "final_objective": trace.final_objective,
        "train_error": train_err,
    }
    timings = {"embed_seconds": t1 - t0, "solve_seconds": t2 - t1}
    return SvmModel(emb, trace.w, cfg, provenance, timings)


def _rowdot(E, w, rows=4096):
    # per-row reduction so a row's value does not depend on the batch it sits
    # in; sliced to keep the elementwise product small
    out = np.empty(E.shape[0], dtype=np.float64)
    for start in range(0, E.shape[0], rows):
        out[start:start + rows] = np.sum(E[start:start + rows] * w, axis=1)
    return out


def _sign(scores):
    return np.where(scores >= 0, 1.0, -1.0)


def _rows(X):
    if isinstance(X, Dataset):
        return X.X
    return X


def decision_function(model, X):
    """Scores ``<w, embed(x)>`` for each row of ``X``; a 1-D dense input is one sample."""
    X = _rows(X)
    single = isinstance(X, np.ndarray) and X.ndim == 1
    if single:
        X = X[None, :]
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    # score in slices so large test sets never hold their full embedding
    for start in range(0, n, _SCORE_ROWS):
        stop = min(start + _SCORE_ROWS, n)
        out[start:stop] = _rowdot(embed_batch(model.embedding, X[start:stop]), model.w)
    return float(out[0]) if single else out


def predict(model, X):
    """Labels in {-1, +1}; a score of exactly zero maps to +1."""
    scores = decision_function(model, X)
    if np.isscalar(scores):
        return 1.0 if scores >= 0 else -1.0
    return _sign(scores)


def _header(model):
    e = model.embedding
    return {
        "kernel": e.spec.to_dict(),
        "m": e.m,
        "r": e.rank,
        "dim": e.dim,
        "lambda": model.config.lam,
        "rel_cutoff": e.rel_cutoff,
        "train_config": model.config.to_dict(),
        "provenance": model.provenance,
    }


def dumps(model):
    """Serialize ``model`` to bytes (see module docstring for the layout)."""
    e = model.embedding
    header = json.dumps(_header(model), sort_keys=True).encode("utf-8")
    landmarks = write_libsvm(Dataset(e.landmarks, np.zeros(e.m)))
    body = b"".join(
        [
            header,
            _U64.pack(len(landmarks)),
            landmarks,
            np.ascontiguousarray(e.transform, dtype="<f8").tobytes(),
            np.ascontiguousarray(e.eigen_spectrum, dtype="<f8").tobytes(),
            np.ascontiguousarray(model.w, dtype="<f8").tobytes(),
        ]
    )
    total = _PREFIX.size + len(body) + _DIGEST
    blob = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header), total) + body
    return blob + hashlib.sha256(blob).digest()


def loads(data):
    """Inverse of :func:`dumps`.

    Raises ModelTruncatedError, ModelVersionError, ModelChecksumError or
    ModelFormatError depending on what is wrong with ``data``.
    """
    data = bytes(data)
    if len(data) < _PREFIX.size:
        raise ModelTruncatedError(f"model stream too short ({len(data)} bytes)")
    magic, version, hlen, total = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    if version != FORMAT_VERSION:
        raise ModelVersionError(
            f"model format version {version} is not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    if len(data) < total:
        raise ModelTruncatedError(f"model stream truncated: {len(data)} of {total} bytes")
    if len(data) > total:
        raise ModelFormatError(f"{len(data) - total} unexpected trailing bytes")
    payload, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(payload).digest() != digest:
        raise ModelChecksumError("model checksum mismatch (file corrupted)")

    try:
        pos = _PREFIX.size
        header = json.loads(payload[pos: pos + hlen].decode("utf-8"))
        pos += hlen
        (llen,) = _U64.unpack_from(payload, pos)
        pos += _U64.size
        landmarks = parse_libsvm(payload[pos: pos + llen], n_features=header["dim"])
        pos += llen
        m, r = header["m"], header["r"]

        def take(count):
            nonlocal pos
            arr = np.frombuffer(payload, dtype="<f8", count=count, offset=pos)
            pos += 8 * count
            return arr.astype(np.float64)

        T = take(r * m).reshape(r, m)
        spectrum = take(m)
        w = take(r)
    except (ValueError, KeyError, struct.error) as exc:
        raise ModelFormatError(f"malformed model payload: {exc}") from exc
    if pos != len(payload) or landmarks.n != m:
        raise ModelFormatError("model payload sizes are inconsistent")

    emb = NystromEmbedding(
        KernelSpec.from_dict(header["kernel"]),
        landmarks.X,
        T,
        spectrum,
        header["rel_cutoff"],
    )
    cfg = TrainConfig.from_dict(header["train_config"])
    return SvmModel(emb, w, cfg, header["provenance"])


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
