"""Command line interface: feat-forge fit | cv | predict."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .dataset import DataError, load_csv
from .engine import STRATEGIES, RunConfig
from .evaluator import SgdConfig
from .harness import ReportError, cross_validate, emit_cv_report, emit_report, fit
from .model import FittedModel
from .variation import VariationConfig


def _add_engine_args(p: argparse.ArgumentParser):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--target", required=True, help="name of the target column")
    p.add_argument("--strategy", default="lexnsga2",
                   choices=[s for s in STRATEGIES])
    p.add_argument("--pop", type=int, default=500, help="population size")
    p.add_argument("--gens", type=int, default=200, help="max generations")
    p.add_argument("--time-budget", type=float, default=3600.0,
                   help="wall clock budget in seconds")
    p.add_argument("--stall-window", type=int, default=50,
                   help="stop after this many generations without median "
                        "validation improvement")
    p.add_argument("--objectives", default="mse,complexity",
                   help="comma list: mse,complexity[,corr|cn]")
    p.add_argument("--feedback", type=float, default=0.75,
                   help="coefficient feedback blend in [0,1]")
    p.add_argument("--xo-rate", type=float, default=0.25,
                   help="fraction of variation events that are crossover")
    p.add_argument("--ridge", type=float, default=1e-3, help="ridge penalty")
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--max-dim", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.1, help="initial SGD step size")
    p.add_argument("--sgd-iters", type=int, default=10,
                   help="SGD steps per individual per generation")
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--val-fraction", type=float, default=0.25,
                   help="held-out fraction used for model selection")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-jobs", type=int, default=1)
    p.add_argument("--complexity-weights", default=None,
                   help="JSON file overriding operator complexity weights")


def _config_from_args(args) -> RunConfig:
    weights = None
    if args.complexity_weights:
        with open(args.complexity_weights) as fh:
            weights = json.load(fh)
    objectives = tuple(s.strip() for s in args.objectives.split(",") if s.strip())
    return RunConfig(
        population_size=args.pop,
        max_generations=args.gens,
        time_budget_s=args.time_budget,
        stall_window=args.stall_window,
        max_depth=args.max_depth,
        max_dim=args.max_dim,
        objectives=objectives,
        strategy=args.strategy,
        sgd=SgdConfig(learning_rate=args.lr, iterations=args.sgd_iters,
                      batch_size=args.batch_size),
        variation=VariationConfig(crossover_ratio=args.xo_rate,
                                  feedback=args.feedback),
        ridge_lambda=args.ridge,
        seed=args.seed,
        val_fraction=args.val_fraction,
        complexity_weights=weights,
        n_jobs=args.n_jobs,
    )


def _cmd_fit(args) -> int:
    dataset = load_csv(args.data, args.target)
    cfg = _config_from_args(args)
    model = fit(dataset, cfg)
    paths = emit_report(model, args.out, fmt=args.format, plot_data=args.plot_data)
    print(f"selected model: {model.expression(with_weights=False)}")
    print(f"validation R^2: {model.metrics['val_r2']:.6f}  "
          f"nodes: {model.metrics['node_count']}  "
          f"complexity: {model.metrics['complexity']}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_cv(args) -> int:
    dataset = load_csv(args.data, args.target)
    cfg = _config_from_args(args)
    report = cross_validate(dataset, cfg, folds=args.folds, shuffles=args.shuffles)
    paths = emit_cv_report(report, args.out, fmt=args.format)
    print(f"median CV R^2: {report.median_r2:.6f} over {args.folds} folds x "
          f"{args.shuffles} shuffles")
    print(f"median nodes: {report.median_node_count:.1f}  "
          f"median complexity: {report.median_complexity:.1f}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_predict(args) -> int:
    model = FittedModel.load(args.model)
    with open(args.data, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        missing = [name for name in model.feature_names if name not in header]
        if missing:
            raise DataError(f"{args.data}: missing feature columns {missing}")
        cols = [header.index(name) for name in model.feature_names]
        rows = []
        for r, cells in enumerate(reader, start=1):
            if not cells or all(c.strip() == "" for c in cells):
                continue
            try:
                rows.append([float(cells[c]) for c in cols])
            except (ValueError, IndexError):
                raise DataError(f"{args.data}: bad feature value at row {r}")
    X = (np.array(rows, dtype=np.float64) if rows
         else np.empty((0, len(cols))))
    preds = model.predict(X)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["prediction"])
        for v in preds:
            writer.writerow([repr(float(v))])
    finally:
        if args.out:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feat-forge",
        description="Evolve interpretable feature representations for regression")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model and write reports")
    _add_engine_args(p_fit)
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.add_argument("--format", default="json", choices=["json", "csv"])
    p_fit.add_argument("--plot-data", action="store_true",
                       help="also write (complexity, train, val) plot data")
    p_fit.set_defaults(func=_cmd_fit)

    p_cv = sub.add_parser("cv", help="cross-validated evaluation")
    _add_engine_args(p_cv)
    p_cv.add_argument("--folds", type=int, default=10)
    p_cv.add_argument("--shuffles", type=int, default=5)
    p_cv.add_argument("--out", required=True, help="output directory")
    p_cv.add_argument("--format", default="json", choices=["json", "csv"])
    p_cv.set_defaults(func=_cmd_cv)

    p_pred = sub.add_parser("predict", help="predict with a saved model")
    p_pred.add_argument("--model", required=True, help="model.json path")
    p_pred.add_argument("--data", required=True, help="CSV with the model's features")
    p_pred.add_argument("--out", default=None, help="output CSV (default stdout)")
    p_pred.set_defaults(func=_cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, ReportError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
