"""Command-line entry point: ``snacks {train,predict,evaluate,bench,grid}``.

Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 bad data or
model file, 5 numerical failure.
"""
import argparse
import csv
import logging
import math
import os
import sys

import numpy as np

from .data_io import binarize_labels, ensure_binary, read_libsvm
from .errors import DataError, ModelFormatError, NumericalError, ParseError
from .kernels import KernelSpec
from .metrics import classification_error, f1_score
from .model import TrainConfig, load_model, predict, save_model, train
from .optim import SolverConfig
from .studies import bench_curves, cross_validate, grid_study

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_NUMERIC = 5


class ArgError(Exception):
    pass


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _fmt(v):
    return repr(float(v))


def _add_data_flags(p):
    p.add_argument("--positive", type=float, default=None,
                   help="binarize: this raw label becomes +1, all others -1")
    p.add_argument("--map01", action="store_true",
                   help="accept {0,1} labels and map them to {-1,+1}")


def _add_model_flags(p, grid=False):
    p.add_argument("--kernel", choices=["rbf", "linear", "poly"], default="rbf")
    bw = p.add_mutually_exclusive_group()
    bw.add_argument("--sigma", type=float, default=None, help="RBF bandwidth")
    bw.add_argument("--gamma", type=float, default=None, help="RBF 1/(2 sigma^2)")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--coef0", type=float, default=1.0)
    if not grid:
        p.add_argument("--lambda", dest="lam", type=float, default=1e-4)
        p.add_argument("--m", type=int, default=800, help="number of landmarks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stages", type=int, default=15)
    p.add_argument("--inner-iters", type=int, default=2000)
    p.add_argument("--shrink", type=float, default=2.0)
    p.add_argument("--eta0", type=float, default=None)
    p.add_argument("--radius0", type=float, default=None)
    p.add_argument("--average-only-projection", action="store_true")
    p.add_argument("--rel-cutoff", type=float, default=1e-12)


def _kernel(args):
    if args.kernel == "rbf":
        if args.gamma is not None:
            return KernelSpec.from_gamma(args.gamma)
        return KernelSpec("rbf", sigma=1.0 if args.sigma is None else args.sigma)
    if args.sigma is not None or args.gamma is not None:
        raise ArgError("--sigma/--gamma only apply to the rbf kernel")
    if args.kernel == "linear":
        return KernelSpec("linear")
    return KernelSpec("polynomial", degree=args.degree, coef0=args.coef0)


def _config(args, m=None, lam=None):
    try:
        solver = SolverConfig(
            stages=args.stages,
            inner_iters=args.inner_iters,
            shrink=args.shrink,
            eta0=args.eta0,
            radius0=args.radius0,
            seed=args.seed,
            average_only_projection=args.average_only_projection,
        )
        return TrainConfig(
            kernel=_kernel(args),
            m=args.m if m is None else m,
            lam=args.lam if lam is None else lam,
            solver=solver,
            rel_cutoff=args.rel_cutoff,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ArgError(str(exc)) from exc


def _check_paths(*paths):
    for p in paths:
        if p is not None and not os.path.isfile(p):
            raise FileNotFoundError(f"no such file: {p}")


def _load(path, args, n_features=None):
    ds = read_libsvm(path, n_features=n_features)
    if getattr(args, "positive", None) is not None:
        ds = binarize_labels(ds, args.positive)
    return ensure_binary(ds, map_01=getattr(args, "map01", False))


def cmd_train(args):
    _check_paths(args.data)
    cfg = _config(args)
    ds = _load(args.data, args)
    if cfg.m > ds.n:
        raise ArgError(f"--m {cfg.m} exceeds the {ds.n} samples in {args.data}")
    model = train(cfg, ds, name=os.path.basename(args.data))
    save_model(model, args.out)
    t = model.timings
    print(f"embed_seconds={t['embed_seconds']:.4f}")
    print(f"solve_seconds={t['solve_seconds']:.4f}")
    print(f"rank={model.embedding.rank}")
    print(f"objective={_fmt(model.provenance['final_objective'])}")
    print(f"train_error={_fmt(model.provenance['train_error'])}")
    return EXIT_OK


def _load_for_model(path, args, model):
    ds = _load(path, args)
    if ds.dim > model.embedding.dim:
        raise DataError(
            f"{path} uses {ds.dim} features but the model was trained on "
            f"{model.embedding.dim}"
        )
    return ds


def cmd_predict(args):
    _check_paths(args.model, args.data)
    model = load_model(args.model)
    ds = _load_for_model(args.data, args, model)
    labels = predict(model, ds)
    lines = "".join("+1\n" if v > 0 else "-1\n" for v in labels)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(lines)
    else:
        sys.stdout.write(lines)
    return EXIT_OK


def cmd_evaluate(args):
    _check_paths(args.model, args.data)
    model = load_model(args.model)
    ds = _load_for_model(args.data, args, model)
    if ds.n == 0:
        raise ArgError(f"test file {args.data} holds no samples")
    pred = predict(model, ds)
    c_err = classification_error(pred, ds.y)
    f1 = f1_score(pred, ds.y)
    print(f"n_test={ds.n}")
    print(f"c_err={_fmt(c_err)}")
    print(f"f1={_fmt(f1)}")
    if args.csv:
        name = args.name or os.path.basename(args.data)
        new = not os.path.exists(args.csv) or os.path.getsize(args.csv) == 0
        with open(args.csv, "a", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            if new:
                wr.writerow(["dataset", "n_test", "c_err", "f1"])
            wr.writerow([name, ds.n, _fmt(c_err), _fmt(f1)])
    return EXIT_OK


def cmd_cv(args):
    _check_paths(args.data)
    cfg = _config(args)
    ds = _load(args.data, args)
    res = cross_validate(ds, cfg, k=args.folds, seed=args.split_seed, workers=args.workers)
    errs = np.array([r.test_error for r in res])
    print(f"mean_cv_error={_fmt(errs.mean())}")
    print(f"std_cv_error={_fmt(errs.std())}")
    print(f"embed_seconds={sum(r.embed_seconds for r in res):.4f}")
    print(f"solve_seconds={sum(r.solve_seconds for r in res):.4f}")
    return EXIT_OK


def cmd_bench(args):
    _check_paths(args.train, args.test)
    cfg = _config(args)
    train_ds = _load(args.train, args)
    test_ds = _load(args.test, args)
    if cfg.m > train_ds.n:
        raise ArgError(f"--m {cfg.m} exceeds the {train_ds.n} training samples")
    if args.checkpoints < 1 or args.epochs <= 0:
        raise ArgError("--checkpoints must be >= 1 and --epochs > 0")
    dim = max(train_ds.dim, test_ds.dim)
    train_ds, test_ds = train_ds.with_dim(dim), test_ds.with_dim(dim)
    curves = bench_curves(train_ds, test_ds, cfg, epochs=args.epochs,
                          checkpoints=args.checkpoints, seeds=args.seeds)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, rows in curves.items():
        path = os.path.join(args.out_dir, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            # wall time is left out so that reruns produce identical files
            wr.writerow(["seed", "oracle_calls", "objective", "test_accuracy"])
            for seed, calls, f, _secs, acc in rows:
                wr.writerow([seed, calls, _fmt(f), _fmt(acc)])
        print(f"wrote {path}")
    return EXIT_OK


def _lambda_grid(args):
    if args.lambdas:
        return args.lambdas
    lo, hi, num = args.lambda_range
    return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), int(num))]


def cmd_grid(args):
    _check_paths(args.data)
    if not args.lambdas and not args.lambda_range:
        raise ArgError("give --lambdas or --lambda-range")
    lams = _lambda_grid(args)
    if not args.ms or not lams:
        raise ArgError("empty grid")
    ds = _load(args.data, args)
    if max(args.ms) > ds.n - math.ceil(ds.n / args.folds):
        raise ArgError("largest --ms value exceeds the training-fold size")
    cfg = _config(args, m=args.ms[0], lam=lams[0])
    cells = grid_study(ds, cfg, args.ms, lams, k=args.folds, seed=args.split_seed,
                       workers=args.workers)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        wr = csv.writer(out, lineterminator="\n")
        wr.writerow(["m", "lambda", "mean_cv_error", "std_cv_error"])
        for c in cells:
            wr.writerow([c.m, _fmt(c.lam), _fmt(c.mean_cv_error), _fmt(c.std_cv_error)])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="snacks", description="Nyström kernel SVM trained by staged stochastic subgradient"
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write it to --out")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    _add_data_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write +1/-1 predictions, one per line")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    _add_data_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="classification error and F1 on a labelled file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--csv", default=None, help="append a dataset,n_test,c_err,f1 row")
    p.add_argument("--name", default=None, help="dataset name for the CSV row")
    _add_data_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="k-fold cross-validated error for one configuration")
    p.add_argument("--data", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    _add_model_flags(p)
    _add_data_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("bench", help="accuracy/objective curves for the staged solver vs SSG")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--epochs", type=float, default=4.0)
    p.add_argument("--checkpoints", type=int, default=20)
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--out-dir", required=True)
    _add_model_flags(p)
    _add_data_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("grid", help="k-fold CV error over an (m, lambda) grid")
    p.add_argument("--data", required=True)
    p.add_argument("--ms", type=_int_list, required=True)
    p.add_argument("--lambdas", type=_float_list, default=None)
    p.add_argument("--lambda-range", type=float, nargs=3, metavar=("LO", "HI", "NUM"),
                   default=None, help="log-spaced lambda values")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_model_flags(p, grid=True)
    _add_data_flags(p)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(message)s")
    try:
        return args.func(args)
    except ArgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (ParseError, DataError, ModelFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
