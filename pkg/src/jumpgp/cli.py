"""Command line entry point: ``jumpgp {gen,predict,bench,neighborhoods}``."""

from __future__ import annotations

import argparse
import csv
import os
import sys
import warnings

import numpy as np

from . import bench
from .datagen import (
    GENERATORS,
    MembershipMask,
    default_spec,
    generate,
    load_csv,
    load_inputs,
    save_csv,
)
from .gp import MLEConvergenceWarning, global_gp_predict
from .levels import CLASSIFIER_KINDS, write_mixture_csv
from .local import LagpConfig, OlagpConfig, batch_predict
from .modular import MjgpConfig, build_feature, predict_augmented


class ConfigError(Exception):
    pass


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _spec_from_args(args):
    overrides = {"seed": args.seed}
    size = args.size if args.size is not None else args.grid
    if size is not None:
        overrides["size"] = size
    if args.mu is not None:
        if len(args.mu) != 2:
            raise ConfigError("--mu needs two values")
        overrides["means"] = args.mu
    if args.tau2 is not None:
        overrides["tau2"] = args.tau2
    if args.theta is not None:
        overrides["theta"] = args.theta
    if args.d is not None:
        overrides["d"] = args.d
    return default_spec(args.name, **overrides)


def _add_gen_args(p, name_flag="--name"):
    p.add_argument(name_flag, dest="name", required=True,
                   help=f"dataset: one of {', '.join(GENERATORS)}")
    p.add_argument("--size", type=int, help="grid side (masked surfaces) or design size")
    p.add_argument("--grid", type=int, help="alias of --size for grid surfaces")
    p.add_argument("--mu", type=_floats, help="level means, e.g. 27,0")
    p.add_argument("--tau2", type=float, help="surface kernel scale")
    p.add_argument("--theta", type=_floats, help="surface lengthscales, e.g. 0.1,0.1")
    p.add_argument("--d", type=int, help="input dimension (michalewicz)")
    p.add_argument("--mask-file", help="raster membership mask for phantom/star")


def cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    mask = MembershipMask.from_file(args.mask_file) if args.mask_file else None
    data = generate(spec, mask)
    save_csv(args.out, data)
    print(f"wrote {data.N} rows (d={data.d}) to {args.out}")
    return 0


def _write_rows(path, header, cols) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in zip(*cols):
            out.writerow([v if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row])


def _local_method(method: str, args):
    if method.endswith("olagp"):
        return OlagpConfig(args.n_min, args.n_max)
    if method.endswith("lagp"):
        return LagpConfig(args.n)
    return "global"


def cmd_predict(args) -> int:
    train = load_csv(args.train)
    Xtest = load_inputs(args.test)
    if Xtest.shape[1] != train.d:
        raise ConfigError(f"test inputs have d={Xtest.shape[1]}, training data has d={train.d}")
    method = args.method
    if method == "globalgp":
        res = global_gp_predict(train, Xtest, n_starts=args.starts, seed=args.seed)
    elif method in ("lagp", "olagp"):
        res = batch_predict(Xtest, train, _local_method(method, args), workers=args.workers)
    else:
        cfg = MjgpConfig(gp=_local_method(method, args), classifier=args.classifier,
                         seed=args.seed, global_starts=args.starts)
        feature = build_feature(train, cfg, Xtest)
        if args.mixture_out:
            write_mixture_csv(args.mixture_out, train.Y, feature.mixture)
        res = predict_augmented(train, Xtest, feature, cfg, workers=args.workers)
    nhat = res.nhat if res.nhat is not None else np.zeros(len(res), dtype=int)
    header = [f"x{k + 1}" for k in range(train.d)] + ["mean", "var", "nhat"]
    _write_rows(args.out, header, list(Xtest.T) + [res.mean, res.var, nhat])
    if res.errors:
        print(f"warning: {len(res.errors)} test points failed (NaN rows)", file=sys.stderr)
    print(f"wrote {len(res)} predictions to {args.out}")
    return 0


def cmd_neighborhoods(args) -> int:
    train = load_csv(args.train)
    Xtest = load_inputs(args.test)
    if Xtest.shape[1] != train.d:
        raise ConfigError(f"test inputs have d={Xtest.shape[1]}, training data has d={train.d}")
    res = batch_predict(Xtest, train, OlagpConfig(args.n_min, args.n_max), workers=args.workers)
    header = [f"x{k + 1}" for k in range(train.d)] + ["nhat", "se_at_nhat"]
    _write_rows(args.out, header, list(Xtest.T) + [res.nhat, res.se_star])
    counts = bench.nhat_histogram(res.nhat[res.nhat > 0])
    hist_path = args.hist_out or os.path.splitext(args.out)[0] + "_hist.csv"
    with open(hist_path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["bin", "count"])
        for (lo, hi), c in zip(bench.NHAT_BINS, counts):
            out.writerow([bench.bin_label(lo, hi), int(c)])
            print(f"{bench.bin_label(lo, hi):>8} {int(c)}")
    print(f"wrote {len(res)} rows to {args.out} and histogram to {hist_path}")
    return 0


def cmd_bench(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if args.dataset in GENERATORS:
        overrides = {"seed": args.seed}
        size = args.grid if args.grid is not None else args.size
        if size is not None:
            overrides["size"] = size
        dataset = default_spec(args.dataset, **overrides)
    elif os.path.exists(args.dataset):
        dataset = args.dataset
    else:
        raise ConfigError(f"--dataset must be one of {GENERATORS} or an existing CSV file")
    if args.external_pred and not os.path.exists(args.external_pred):
        raise ConfigError(f"external predictions file {args.external_pred!r} not found")
    cfg = bench.McConfig(
        dataset=dataset,
        methods=methods,
        reps=args.reps,
        train_frac=args.train_frac,
        seed=args.seed,
        out_dir=args.out_dir,
        lagp_n=args.n,
        n_min=args.n_min,
        n_max=args.n_max,
        classifier=args.classifier,
        workers=args.workers,
        global_starts=args.starts,
        external_pred=args.external_pred,
    )

    def progress(rep, method, value):
        print(f"rep {rep:>3} {method:<12} rmse={value:.5f}", flush=True)

    res = bench.run_mc(cfg, progress=progress)
    print(bench.summarize(res).format())
    for (rep, m), msg in sorted(res.failures.items()):
        print(f"rep {rep} {m} failed: {msg}", file=sys.stderr)
    print(f"results in {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jumpgp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset as CSV")
    _add_gen_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    def local_args(q):
        q.add_argument("--n", type=int, default=50, help="LAGP neighborhood size")
        q.add_argument("--n-min", type=int, default=12)
        q.add_argument("--n-max", type=int, default=160)
        q.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("predict", help="fit on a training CSV and predict at test inputs")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--method", choices=bench.METHODS, default="mjgp-olagp")
    p.add_argument("--classifier", choices=CLASSIFIER_KINDS, default="gp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=3, help="MLE starts for global fits")
    p.add_argument("--mixture-out", help="CSV of EM responsibilities (mjgp methods)")
    p.add_argument("--out", required=True)
    local_args(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("neighborhoods", help="OLAGP neighborhood sizes per test point")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hist-out")
    local_args(p)
    p.set_defaults(func=cmd_neighborhoods)

    p = sub.add_parser("bench", help="Monte Carlo RMSE comparison over random splits")
    p.add_argument("--dataset", required=True, help=f"{', '.join(GENERATORS)} or a CSV path")
    p.add_argument("--methods", default="lagp,olagp,mjgp-olagp")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--train-frac", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--grid", type=int, help="grid side for phantom/star")
    p.add_argument("--size", type=int, help="design size for onedim/michalewicz")
    p.add_argument("--classifier", choices=CLASSIFIER_KINDS, default="gp")
    p.add_argument("--starts", type=int, default=1, help="MLE starts for global fits")
    p.add_argument("--external-pred")
    local_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    warnings.simplefilter("ignore", MLEConvergenceWarning)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
