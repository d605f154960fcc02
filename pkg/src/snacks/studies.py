"""Cross-validation, (m, lambda) grids and solver comparison curves."""
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data_io import ensure_binary, split_kfold
from .embedding import embed_batch, fit_embedding
from .metrics import classification_error
from .model import _rowdot, _sign
from .optim import Objective, solve_snacks, solve_ssg

__all__ = [
    "GridCell",
    "FoldResult",
    "cross_validate",
    "grid_study",
    "bench_curves",
    "plan_budget",
    "worker_count",
    "largest_plateau",
]

WORKERS_ENV = "SNACKS_WORKERS"


def worker_count(requested=None):
    """Worker count, capped by the ``SNACKS_WORKERS`` environment variable."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(WORKERS_ENV)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _pool_map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class FoldResult:
    fold: int
    lam: float
    test_error: float
    train_error: float
    embed_seconds: float
    solve_seconds: float


@dataclass(frozen=True)
class GridCell:
    m: int
    lam: float
    mean_cv_error: float
    std_cv_error: float


def _fold_task(ds, folds, cfg, lams):
    """Fit one embedding on a training fold and solve for every lambda."""

    def run(fold):
        tr, te = folds.split(fold)
        train, test = ds.take(tr), ds.take(te)
        t0 = time.perf_counter()
        emb = fit_embedding(cfg.kernel, train, cfg.m, cfg.seed, cfg.rel_cutoff)
        X_tr = embed_batch(emb, train)
        X_te = embed_batch(emb, test)
        embed_secs = time.perf_counter() - t0
        out = []
        for lam in lams:
            t1 = time.perf_counter()
            trace = solve_snacks(Objective(X_tr, train.y, lam), cfg.solver)
            solve_secs = time.perf_counter() - t1
            out.append(
                FoldResult(
                    fold,
                    lam,
                    classification_error(_sign(_rowdot(X_te, trace.w)), test.y),
                    classification_error(_sign(_rowdot(X_tr, trace.w)), train.y),
                    embed_secs,
                    solve_secs,
                )
            )
        return out

    return run


def cross_validate(ds, cfg, k=5, seed=0, workers=None, lams=None):
    """k-fold CV of the training pipeline; returns a list of :class:`FoldResult`.

    Every fold runs exactly what :func:`snacks.model.train` runs on the
    training part, so the errors match manual train/evaluate calls.
    """
    ds = ensure_binary(ds)
    folds = split_kfold(ds.n, k, seed)
    lams = [cfg.lam] if lams is None else list(lams)
    res = _pool_map(_fold_task(ds, folds, cfg, lams), list(range(k)), worker_count(workers))
    return [r for fold in res for r in fold]


def grid_study(ds, cfg, ms, lams, k=5, seed=0, workers=None):
    """Mean and std of k-fold CV error over an (m, lambda) grid.

    Rows are ordered with m outer and lambda inner; each (m, fold) pair
    shares one embedding across all lambda values.
    """
    ds = ensure_binary(ds)
    folds = split_kfold(ds.n, k, seed)
    lams = list(lams)
    tasks = [(m, f) for m in ms for f in range(k)]

    def run(task):
        m, f = task
        return _fold_task(ds, folds, replace(cfg, m=m), lams)(f)

    results = dict(zip(tasks, _pool_map(run, tasks, worker_count(workers))))
    cells = []
    for m in ms:
        for j, lam in enumerate(lams):
            errs = np.array([results[(m, f)][j].test_error for f in range(k)])
            cells.append(GridCell(m, lam, float(errs.mean()), float(errs.std())))
    return cells


def plan_budget(n, epochs, stages, checkpoints):
    """Inner iterations per stage and checkpoint spacing for a matched budget.

    The budget is the smallest multiple of both ``stages`` and
    ``checkpoints`` reaching ``epochs * n`` oracle calls.
    """
    want = int(math.ceil(epochs * n))
    unit = stages * checkpoints // math.gcd(stages, checkpoints)
    budget = int(math.ceil(want / unit)) * unit
    return budget // stages, budget // checkpoints, budget


def bench_curves(train, test, cfg, epochs=4, checkpoints=20, seeds=(0,)):
    """Test accuracy and objective along the run for the staged solver and SSG.

    Both solvers share the same embedding and oracle-call budget and report
    at the same checkpoints. Returns ``{"snacks": rows, "ssg": rows}`` where
    each row is ``(seed, oracle_calls, objective, seconds, test_accuracy)``.
    """
    train = ensure_binary(train)
    test = ensure_binary(test)
    emb = fit_embedding(cfg.kernel, train, cfg.m, cfg.seed, cfg.rel_cutoff)
    X_tr = embed_batch(emb, train)
    X_te = embed_batch(emb, test)
    obj = Objective(X_tr, train.y, cfg.lam)
    T, every, budget = plan_budget(train.n, epochs, cfg.solver.stages, checkpoints)

    def accuracy(w):
        return 1.0 - classification_error(_sign(_rowdot(X_te, w)), test.y)

    out = {"snacks": [], "ssg": []}
    for seed in seeds:
        for name in out:
            accs = []
            cb = lambda calls, w: accs.append(accuracy(w))  # noqa: E731
            if name == "snacks":
                scfg = replace(cfg.solver, inner_iters=T, eval_every=every, seed=seed)
                trace = solve_snacks(obj, scfg, callback=cb)
            else:
                trace = solve_ssg(obj, budget, seed=seed, eval_every=every, callback=cb)
            for calls, f, secs, acc in zip(
                trace.oracle_calls, trace.objective, trace.seconds, accs
            ):
                out[name].append((seed, calls, f, secs, acc))
    return out


def largest_plateau(cells, tol=0.01):
    """Size of the largest 4-connected group of grid cells within ``tol`` of the best.

    ``cells`` is the output of :func:`grid_study`; neighbours are adjacent
    positions in the (m, lambda) grid.
    """
    ms = sorted({c.m for c in cells})
    lams = sorted({c.lam for c in cells})
    err = np.full((len(ms), len(lams)), np.inf)
    for c in cells:
        err[ms.index(c.m), lams.index(c.lam)] = c.mean_cv_error
    good = err <= err.min() + tol
    seen = np.zeros_like(good)
    best = 0
    for start in zip(*np.nonzero(good)):
        if seen[start]:
            continue
        stack, size = [start], 0
        seen[start] = True
        while stack:
            i, j = stack.pop()
            size += 1
            for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                if 0 <= a < good.shape[0] and 0 <= b < good.shape[1]:
                    if good[a, b] and not seen[a, b]:
                        seen[a, b] = True
                        stack.append((a, b))
        best = max(best, size)
    return best
