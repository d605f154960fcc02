"""Primal Nyström SVM objective and stochastic subgradient solvers.

The objective over embedded data ``X`` (n x r) and labels ``y`` is

    F(w) = mean_i max(0, 1 - y_i <w, x_i>) + (lam / 2) ||w||^2

where ``lam`` is the *oracle* regularization: the stochastic subgradient
returned by the oracle is ``lam * w - y_i x_i`` on active samples and
``lam * w`` otherwise, which is an exact subgradient of the above.

Two solvers are provided: :func:`solve_ssg`, a Pegasos-style stochastic
subgradient baseline, and :func:`solve_snacks`, a staged (restarted)
projected stochastic subgradient method that shrinks both the step size and
the radius of the ball it projects onto by a constant factor between stages.
"""
import csv
import io
import math
import time
from dataclasses import dataclass, field

import numba
import numpy as np

__all__ = [
    "Objective",
    "SolverConfig",
    "SolveTrace",
    "hinge",
    "objective_value",
    "stochastic_subgradient",
    "full_subgradient",
    "project_ball",
    "solve_ssg",
    "solve_snacks",
]

# Projection targets a radius a few ulps inside D so that feasibility
# ||w - c|| <= D survives any reasonable re-evaluation of the norm.
_SHRINK = 1.0 - 2.0**-48
_SSG_BLOCK = 1 << 16


@dataclass(eq=False)
class Objective:
    X: np.ndarray
    y: np.ndarray
    lam: float

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64).reshape(-1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"X of shape {self.X.shape} does not match {self.y.shape[0]} labels"
            )
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        self.lam = float(self.lam)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def _check(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.dim,):
            raise ValueError(f"w has shape {w.shape}, expected ({self.dim},)")
        return w

    def value(self, w):
        return objective_value(self, w)


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters of the staged solver.

    ``radius0`` defaults to ``1 / sqrt(lam)``, a ball around the origin that
    contains the minimizer; ``eta0`` defaults to the projected-subgradient
    step for that ball (see :meth:`resolve`).
    """

    stages: int = 15
    inner_iters: int = 2000
    shrink: float = 2.0
    eta0: float = None
    radius0: float = None
    seed: int = 0
    eval_every: int = 0
    average_only_projection: bool = False

    def __post_init__(self):
        if self.stages < 1 or self.inner_iters < 1:
            raise ValueError("stages and inner_iters must be >= 1")
        if not self.shrink > 1:
            raise ValueError(f"shrink factor must exceed 1, got {self.shrink}")
        if self.eta0 is not None and not self.eta0 > 0:
            raise ValueError(f"eta0 must be positive, got {self.eta0}")
        if self.radius0 is not None and not self.radius0 > 0:
            raise ValueError(f"radius0 must be positive, got {self.radius0}")
        if self.eval_every < 0:
            raise ValueError("eval_every must be >= 0")

    @property
    def budget(self):
        return self.stages * self.inner_iters

    def resolve(self, obj):
        """Return ``(radius0, eta0)`` with defaults filled in for ``obj``.

        The default step is ``D0 / (G sqrt(T))`` where ``G`` bounds the oracle
        norm over every ball the iterates can reach: all of them lie within
        ``D0 * shrink / (shrink - 1)`` of the origin when starting from 0.
        """
        D0 = self.radius0 if self.radius0 is not None else 1.0 / math.sqrt(obj.lam)
        if self.eta0 is not None:
            return float(D0), float(self.eta0)
        x_max = float(np.sqrt(np.max(np.einsum("ij,ij->i", obj.X, obj.X)))) if obj.n else 0.0
        G = x_max + obj.lam * D0 * self.shrink / (self.shrink - 1.0)
        return float(D0), float(D0 / (G * math.sqrt(self.inner_iters)))

    def to_dict(self):
        return {
            "stages": self.stages,
            "inner_iters": self.inner_iters,
            "shrink": self.shrink,
            "eta0": self.eta0,
            "radius0": self.radius0,
            "seed": self.seed,
            "eval_every": self.eval_every,
            "average_only_projection": self.average_only_projection,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(eq=False)
class SolveTrace:
    oracle_calls: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    w: np.ndarray = None
    final_objective: float = None
    stage_radii: list = field(default_factory=list)
    stage_steps: list = field(default_factory=list)
    # filled only when a run is instrumented with record=True
    iterates: np.ndarray = None
    centers: np.ndarray = None

    def add(self, calls, obj, secs):
        self.oracle_calls.append(int(calls))
        self.objective.append(float(obj))
        self.seconds.append(float(secs))

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["oracle_calls", "objective", "seconds"])
        for row in zip(self.oracle_calls, self.objective, self.seconds):
            wr.writerow([row[0], repr(row[1]), repr(row[2])])
        return buf.getvalue()


def hinge(y, score):
    return max(0.0, 1.0 - y * score)


def objective_value(obj, w):
    w = obj._check(w)
    margins = 1.0 - obj.y * (obj.X @ w)
    return float(np.mean(np.maximum(margins, 0.0)) + 0.5 * obj.lam * (w @ w))


def stochastic_subgradient(obj, w, i):
    w = obj._check(w)
    x = obj.X[i]
    y = obj.y[i]
    g = obj.lam * w
    if y * (w @ x) < 1.0:
        g = g - y * x
    return g


def full_subgradient(obj, w):
    """Average of :func:`stochastic_subgradient` over every sample."""
    w = obj._check(w)
    active = obj.y * (obj.X @ w) < 1.0
    return obj.lam * w - (obj.y[active] @ obj.X[active]) / obj.n


def project_ball(w, c, D):
    """Euclidean projection of ``w`` onto the ball of radius ``D`` centred at ``c``."""
    w = np.asarray(w, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    out = np.empty_like(w)
    _project(w, c, float(D), out)
    return out


@numba.njit(cache=True, nogil=True)
def _dist(a, c):
    s = 0.0
    for j in range(a.shape[0]):
        d = a[j] - c[j]
        s += d * d
    return math.sqrt(s)


@numba.njit(cache=True, nogil=True)
def _project(w, c, D, out):
    target = D * _SHRINK
    nrm = _dist(w, c)
    if nrm <= target:
        for j in range(w.shape[0]):
            out[j] = w[j]
        return
    scale = target / nrm
    while True:
        for j in range(w.shape[0]):
            out[j] = c[j] + scale * (w[j] - c[j])
        if _dist(out, c) <= target:
            return
        scale *= _SHRINK


@numba.njit(cache=True, nogil=True)
def _subgrad_step(X, y, lam, w, i, eta):
    xi = X[i]
    s = 0.0
    for j in range(w.shape[0]):
        s += w[j] * xi[j]
    yi = y[i]
    if yi * s < 1.0:
        for j in range(w.shape[0]):
            w[j] -= eta * (lam * w[j] - yi * xi[j])
    else:
        for j in range(w.shape[0]):
            w[j] -= eta * (lam * w[j])


@numba.njit(cache=True, nogil=True)
def _snacks_segment(X, y, lam, w, c, wsum, idx, eta, D, avg_only, tmp, rec, rec_off):
    for t in range(idx.shape[0]):
        _subgrad_step(X, y, lam, w, idx[t], eta)
        if avg_only:
            _project(w, c, D, tmp)
            p = tmp
        else:
            _project(w, c, D, tmp)
            for j in range(w.shape[0]):
                w[j] = tmp[j]
            p = w
        for j in range(w.shape[0]):
            wsum[j] += p[j]
        if rec.shape[0] > 0:
            for j in range(w.shape[0]):
                rec[rec_off + t, j] = p[j]


@numba.njit(cache=True, nogil=True)
def _ssg_segment(X, y, lam, w, wsum, idx, t_start, t0, avg_from):
    for s in range(idx.shape[0]):
        t = t_start + s
        eta = 1.0 / (lam * (t + t0))
        _subgrad_step(X, y, lam, w, idx[s], eta)
        if t >= avg_from:
            for j in range(w.shape[0]):
                wsum[j] += w[j]


def _cuts(start, stop, every):
    """Segment boundaries in ``(start, stop]`` at multiples of ``every``."""
    if every <= 0:
        return [stop]
    first = (start // every + 1) * every
    cuts = list(range(first, stop, every))
    cuts.append(stop)
    return cuts


class _Clock:
    def __init__(self):
        self.elapsed = 0.0
        self._t = None

    def __enter__(self):
        self._t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed += time.perf_counter() - self._t


def _checkpoint(trace, obj, calls, w, clock, every, callback):
    if every > 0 and calls % every == 0:
        trace.add(calls, objective_value(obj, w), clock.elapsed)
        if callback is not None:
            callback(calls, w.copy())


def solve_ssg(obj, total_iters, seed=0, eval_every=0, t0=1.0, w0=None, callback=None):
    """Pegasos-style stochastic subgradient descent.

    Step ``t`` (1-based) uses ``eta_t = 1 / (lam (t + t0))``. Returns the
    average of the iterates from the second half of the run. Checkpoints
    record the live iterate every ``eval_every`` oracle calls; ``callback``
    receives ``(oracle_calls, w)`` at each checkpoint.
    """
    if total_iters < 1:
        raise ValueError("total_iters must be >= 1")
    rng = np.random.default_rng(seed)
    w = np.zeros(obj.dim) if w0 is None else np.array(w0, dtype=np.float64)
    wsum = np.zeros(obj.dim)
    avg_from = total_iters // 2 + 1
    trace = SolveTrace()
    clock = _Clock()
    done = 0
    while done < total_iters:
        block = min(_SSG_BLOCK, total_iters - done)
        idx = rng.integers(0, obj.n, size=block)
        pos = 0
        for cut in _cuts(done, done + block, eval_every):
            with clock:
                _ssg_segment(
                    obj.X, obj.y, obj.lam, w, wsum, idx[pos: cut - done],
                    done + pos + 1, float(t0), avg_from,
                )
            pos = cut - done
            _checkpoint(trace, obj, cut, w, clock, eval_every, callback)
        done += block
    trace.w = wsum / (total_iters - avg_from + 1)
    trace.final_objective = objective_value(obj, trace.w)
    if eval_every <= 0:
        trace.add(total_iters, trace.final_objective, clock.elapsed)
    return trace


def solve_snacks(obj, cfg, w0=None, callback=None, record=False):
    """Staged projected stochastic subgradient method.

    For each stage ``k = 1..K`` the current point becomes the centre ``c`` of
    a ball of radius ``D_k``; ``T`` projected steps with step ``eta_k`` are
    taken, their uniform average becomes the next point, and both ``D`` and
    ``eta`` are divided by ``cfg.shrink``.

    With ``cfg.average_only_projection`` the live iterate is left
    unprojected and only the copies entering the average are projected.
    ``record=True`` stores every inner iterate entering the average and every
    stage centre in the trace (memory ``K * T * r``).
    """
    K, T = cfg.stages, cfg.inner_iters
    D0, eta0 = cfg.resolve(obj)
    rng = np.random.default_rng(cfg.seed)
    w = np.zeros(obj.dim) if w0 is None else np.array(w0, dtype=np.float64)
    tmp = np.empty(obj.dim)
    trace = SolveTrace()
    if record:
        trace.iterates = np.empty((K, T, obj.dim))
        trace.centers = np.empty((K, obj.dim))
    no_rec = np.empty((0, obj.dim))
    clock = _Clock()
    calls = 0
    for k in range(K):
        D = D0 / cfg.shrink**k
        eta = eta0 / cfg.shrink**k
        trace.stage_radii.append(D)
        trace.stage_steps.append(eta)
        c = w.copy()
        if record:
            trace.centers[k] = c
        wsum = np.zeros(obj.dim)
        idx = rng.integers(0, obj.n, size=T)
        rec = trace.iterates[k] if record else no_rec
        pos = 0
        for cut in _cuts(calls, calls + T, cfg.eval_every):
            with clock:
                _snacks_segment(
                    obj.X, obj.y, obj.lam, w, c, wsum, idx[pos: cut - calls],
                    eta, D, cfg.average_only_projection, tmp, rec, pos,
                )
            pos = cut - calls
            if cut < calls + T:
                _checkpoint(trace, obj, cut, w, clock, cfg.eval_every, callback)
        calls += T
        w = wsum / T
        _checkpoint(trace, obj, calls, w, clock, cfg.eval_every, callback)
    trace.w = w
    trace.final_objective = objective_value(obj, w)
    if cfg.eval_every <= 0:
        trace.add(calls, trace.final_objective, clock.elapsed)
    return trace
