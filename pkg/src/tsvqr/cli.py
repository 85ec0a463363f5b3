"""Command-line entry point: ``tsvqr gen|train|predict|gridsearch|eval|plotdata``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import Dataset, Hyperparams, KernelSpec, Standardizer
from .dcdm import SolverConfig
from .model import (classify_support_vectors, fit, load_model, predict_bounds,
                    save_model)
from .selection import (EPS_GRID, POWERS_OF_TWO, GridSpec, evaluate, grid_search,
                        write_results_csv)
from .synthetic import (FAMILIES, GeneratorSpec, generate, generate_sinc,
                        read_csv, read_features_csv, sinc_quantile_oracle, write_csv)


class CommandError(Exception):
    pass


# -- argument types ----------------------------------------------------------

def _number(text: str) -> float:
    """Accept plain floats and powers of two written as ``2^k``."""
    text = text.strip()
    try:
        if text.startswith("2^"):
            return 2.0 ** float(text[2:])
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _positive(text: str) -> float:
    v = _number(text)
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _tau(text: str) -> float:
    v = _number(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"tau must lie in (0, 1): {text!r}")
    return v


def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative: {text!r}")
    return v


def _list_of(kind):
    def parse(text: str):
        items = [s for s in text.split(",") if s.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return tuple(kind(s) for s in items)
    return parse


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false: {text!r}")


# -- manifests ---------------------------------------------------------------

def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, tuple):
        return list(v)
    return v


def write_manifest(path, args, inputs=(), outputs=(), timings=None) -> None:
    config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {
        "command": args.command,
        "config": config,
        "inputs": {str(p): _digest(p) for p in inputs},
        "outputs": {str(p): _digest(p) for p in outputs},
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "timings": timings or {},
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".manifest.json")


def _solver(args) -> SolverConfig:
    return SolverConfig(tol=args.tol, max_epochs=args.max_epochs,
                        shuffle=args.shuffle, seed=args.seed)


def _kernel(kind: str, p) -> KernelSpec:
    return KernelSpec.linear() if kind == "linear" else KernelSpec(kind, p)


def _print_json(doc) -> None:
    print(json.dumps(doc, indent=1, sort_keys=True))


# -- commands ----------------------------------------------------------------

def cmd_gen(args) -> int:
    t0 = time.perf_counter()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    name = args.name or args.family
    spec = GeneratorSpec(args.family, args.n_train, args.n_test, args.seed, noise=not args.no_noise)
    if spec.family == "Sinc" and args.sinc_grid:
        train = generate_sinc(spec.n_train, args.seed, grid=True)
        _, test = generate(spec)
    else:
        train, test = generate(spec)
    tr_path, te_path = outdir / f"{name}_train.csv", outdir / f"{name}_test.csv"
    write_csv(train, tr_path)
    write_csv(test, te_path)
    write_manifest(outdir / f"{name}.manifest.json", args, outputs=(tr_path, te_path),
                   timings={"total_seconds": time.perf_counter() - t0})
    print(f"wrote {tr_path} ({train.n_samples} rows) and {te_path} ({test.n_samples} rows)")
    return 0


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    data = read_csv(args.train, args.target_col)
    h = Hyperparams(c1=args.c1, c2=args.c2, eps1=args.eps1, eps2=args.eps2, tau=args.tau,
                    kernel=_kernel(args.kernel, args.p), solver=_solver(args))
    model = fit(data, h, standardize=args.standardize)
    save_model(model, args.out)
    report = evaluate(model, data, h.tau, train=data)
    lo, up = model.diagnostics
    summary = {
        "model": str(args.out),
        "lower_dual": lo.to_dict(),
        "upper_dual": up.to_dict(),
        "training_metrics": report.to_dict(),
    }
    if not model.converged:
        print("warning: solver did not reach tolerance; see diagnostics", file=sys.stderr)
    _print_json(summary)
    write_manifest(_manifest_path(args.out), args, inputs=(args.train,), outputs=(args.out,),
                   timings={"fit_seconds": model.fit_seconds,
                            "total_seconds": time.perf_counter() - t0})
    return 0


def _write_predictions(path, fl, fu, f) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["f_lower", "f_upper", "f"])
        for row in zip(fl, fu, f):
            w.writerow([repr(float(v)) for v in row])


def cmd_predict(args) -> int:
    t0 = time.perf_counter()
    model = load_model(args.model)
    X, _ = read_features_csv(args.input, model.n_features, args.target_col)
    fl, fu, f = predict_bounds(model, X)
    _write_predictions(args.out, fl, fu, f)
    write_manifest(_manifest_path(args.out), args, inputs=(args.model, args.input),
                   outputs=(args.out,), timings={"total_seconds": time.perf_counter() - t0})
    print(f"wrote {len(f)} predictions to {args.out}")
    return 0


def cmd_gridsearch(args) -> int:
    t0 = time.perf_counter()
    data = read_csv(args.train, args.target_col)
    fit_data = Standardizer.fit(data.inputs).apply(data) if args.standardize else data
    grid = GridSpec(c_values=args.c_values, p_values=args.p_values, eps_values=args.eps_values,
                    tau_values=(args.tau,), tie_c=args.tie_c, tie_eps=args.tie_eps)
    results = grid_search(fit_data, grid, args.tau, args.kernel, _solver(args),
                          n_jobs=args.threads)
    write_results_csv(results, args.results)
    best = next((r for r in results if r.error is None), None)
    if best is None:
        raise CommandError("every grid cell failed; see the results CSV")
    # refit the winner on the raw data so its file carries the scaling
    model = fit(data, best.hyper, standardize=args.standardize)
    save_model(model, args.best_model)
    _print_json({"cells": len(results), "best": best.hyper.to_dict(), "gacv": best.gacv,
                 "results": str(args.results), "best_model": str(args.best_model)})
    write_manifest(_manifest_path(args.results), args, inputs=(args.train,),
                   outputs=(args.results, args.best_model),
                   timings={"total_seconds": time.perf_counter() - t0})
    return 0


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    model = load_model(args.model)
    test = read_csv(args.test, args.target_col)
    if test.n_features != model.n_features:
        raise CommandError(f"test data has {test.n_features} features, model expects {model.n_features}")
    tau = model.hyper.tau if args.tau is None else args.tau
    train = None
    if np.all(np.isfinite(model.train_targets)):
        raw = model.train_inputs
        if model.standardizer is not None:
            raw = raw * model.standardizer.scale + model.standardizer.mean
        train = Dataset(raw, model.train_targets)
    report = evaluate(model, test, tau, train=train)
    census = classify_support_vectors(model)
    doc = {"tau": tau, "metrics": report.to_dict(), "support_vectors": census.counts(),
           "converged": model.converged}
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    _print_json(doc)
    write_manifest(_manifest_path(args.json) if args.json else Path(args.model).with_suffix(".eval.manifest.json"),
                   args, inputs=(args.model, args.test),
                   outputs=(args.json,) if args.json else (),
                   timings={"total_seconds": time.perf_counter() - t0})
    return 0


def cmd_plotdata(args) -> int:
    t0 = time.perf_counter()
    models = [load_model(p) for p in args.models]
    n = {m.n_features for m in models}
    if len(n) != 1:
        raise CommandError(f"models disagree on feature dimension: {sorted(n)}")
    n = n.pop()
    if not 0 <= args.feature < n:
        raise CommandError(f"--feature {args.feature} out of range for {n} features")
    if n > 1 and args.oracle:
        raise CommandError("the sinc oracle overlay needs one-feature models")

    def raw_inputs(m):
        X = m.train_inputs
        if m.standardizer is not None:
            X = X * m.standardizer.scale + m.standardizer.mean
        return X

    X0 = np.vstack([raw_inputs(m) for m in models])
    lo = X0[:, args.feature].min() if args.x_min is None else args.x_min
    hi = X0[:, args.feature].max() if args.x_max is None else args.x_max
    xs = np.linspace(lo, hi, args.grid_size)
    Q = np.tile(X0.mean(axis=0), (args.grid_size, 1))
    Q[:, args.feature] = xs
    header = ["x", "tau", "f_lower", "f_upper", "f"] + (["oracle"] if args.oracle else [])
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for m in models:
            tau = m.hyper.tau
            fl, fu, f = predict_bounds(m, Q)
            orc = sinc_quantile_oracle(xs, tau) if args.oracle else None
            for i, x in enumerate(xs):
                row = [x, tau, fl[i], fu[i], f[i]] + ([orc[i]] if args.oracle else [])
                w.writerow([repr(float(v)) for v in row])
    write_manifest(_manifest_path(args.out), args, inputs=tuple(args.models), outputs=(args.out,),
                   timings={"total_seconds": time.perf_counter() - t0})
    print(f"wrote {len(models) * args.grid_size} rows to {args.out}")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--threads", type=_count, default=1,
                        help="worker threads for grid search")
    common.add_argument("--tol", type=_positive, default=1e-6,
                        help="projected-gradient stopping tolerance")
    common.add_argument("--max-epochs", type=_count, default=1000)
    common.add_argument("--shuffle", action="store_true",
                        help="shuffle the coordinate order each epoch (seeded)")

    data_opts = argparse.ArgumentParser(add_help=False)
    data_opts.add_argument("--target-col", default=None,
                           help="name of the response column (default: last column)")

    std_opts = argparse.ArgumentParser(add_help=False)
    std_opts.add_argument("--standardize", dest="standardize", action="store_true", default=True,
                          help="scale features to zero mean, unit variance (default)")
    std_opts.add_argument("--no-standardize", dest="standardize", action="store_false")

    parser = argparse.ArgumentParser(
        prog="tsvqr", description="Twin support vector quantile regression tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--n-train", type=_count, default=None)
    p.add_argument("--n-test", type=_count, default=None)
    p.add_argument("--outdir", default=".")
    p.add_argument("--name", default=None, help="file prefix (default: family)")
    p.add_argument("--no-noise", action="store_true", help="noiseless responses, for debugging")
    p.add_argument("--sinc-grid", action="store_true",
                   help="Sinc only: evenly spaced training inputs instead of uniform draws")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", parents=[common, data_opts, std_opts], help="fit one model")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--c1", type=_positive, default=1.0)
    p.add_argument("--c2", type=_positive, default=1.0)
    p.add_argument("--eps1", type=_positive, default=0.05)
    p.add_argument("--eps2", type=_positive, default=0.05)
    p.add_argument("--tau", type=_tau, default=0.5)
    p.add_argument("--kernel", choices=("gaussian", "linear", "wavelet"), default="gaussian")
    p.add_argument("--p", type=_positive, default=1.0, help="kernel width / dilation")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common, data_opts], help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gridsearch", parents=[common, data_opts, std_opts],
                       help="GACV grid search over C, P and epsilon")
    p.add_argument("--train", required=True)
    p.add_argument("--tau", type=_tau, default=0.5)
    p.add_argument("--kernel", choices=("gaussian", "linear", "wavelet"), default="gaussian")
    p.add_argument("--c-values", type=_list_of(_positive), default=POWERS_OF_TWO)
    p.add_argument("--p-values", type=_list_of(_positive), default=POWERS_OF_TWO)
    p.add_argument("--eps-values", type=_list_of(_positive), default=EPS_GRID)
    p.add_argument("--tie-c", type=_bool, default=True)
    p.add_argument("--tie-eps", type=_bool, default=True)
    p.add_argument("--results", required=True, help="per-cell results CSV")
    p.add_argument("--best-model", required=True)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("eval", parents=[common, data_opts], help="evaluate a model on test data")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--tau", type=_tau, default=None, help="default: the model's tau")
    p.add_argument("--json", default=None, help="also write the report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plotdata", parents=[common], help="export curves over a query grid")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-size", type=_count, default=200)
    p.add_argument("--x-min", type=_number, default=None)
    p.add_argument("--x-max", type=_number, default=None)
    p.add_argument("--feature", type=int, default=0,
                   help="feature varied along the grid; others held at their training mean")
    p.add_argument("--oracle", action="store_true",
                   help="append the analytic sinc conditional quantile")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CommandError, ValueError, OSError, MemoryError, ArithmeticError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
