"""Cross-validation harness and report emission around the engine."""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linear
from .dataset import Dataset
from .engine import Evolution, RunConfig, _rng
from .expr import tree_to_string
from .model import FittedModel, dumps_canonical, package_run
from .objectives import corr_entanglement

_S_SHUFFLE = 101


class ReportError(Exception):
    pass


def fit(dataset: Dataset, cfg: RunConfig | None = None, **overrides) -> FittedModel:
    """Fit one model on the whole dataset; the library entry point."""
    if cfg is None:
        cfg = RunConfig(**overrides)
    elif overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    evo = Evolution(dataset.X, dataset.y, cfg, feature_names=dataset.feature_names)
    result = evo.run()
    return package_run(result, cfg, dataset.target_name)


@dataclass
class FoldResult:
    shuffle: int
    fold: int
    r2: float | None
    mse: float
    node_count: int
    complexity: int
    corr_entanglement: float


@dataclass
class CvReport:
    folds: list = field(default_factory=list)
    shuffle_r2: list = field(default_factory=list)  # aggregate R^2 per shuffle
    median_r2: float = 0.0
    median_mse: float = 0.0
    median_node_count: float = 0.0
    median_complexity: float = 0.0
    median_corr: float = 0.0
    runtime_s: float = 0.0
    n_folds: int = 0
    n_shuffles: int = 0

    def to_dict(self) -> dict:
        return {
            "folds": [dataclasses.asdict(f) for f in self.folds],
            "shuffle_r2": self.shuffle_r2,
            "median_r2": self.median_r2,
            "median_mse": self.median_mse,
            "median_node_count": self.median_node_count,
            "median_complexity": self.median_complexity,
            "median_corr": self.median_corr,
            "runtime_s": self.runtime_s,
            "n_folds": self.n_folds,
            "n_shuffles": self.n_shuffles,
        }


def _fold_slices(n: int, folds: int):
    sizes = np.full(folds, n // folds)
    sizes[: n % folds] += 1
    stops = np.cumsum(sizes)
    starts = stops - sizes
    return list(zip(starts, stops))


def cross_validate(dataset: Dataset, cfg: RunConfig, folds: int = 10,
                   shuffles: int = 5) -> CvReport:
    """Seeded shuffled k-fold; each fold's model never sees its test rows.

    Per-fold R^2 is reported when the fold has at least 2 rows; single-row
    folds (leave-one-out) are scored only through the per-shuffle aggregate
    of pooled predictions.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if dataset.n < folds:
        raise ValueError(f"{dataset.n} rows cannot be split into {folds} folds")
    started = time.monotonic()
    report = CvReport(n_folds=folds, n_shuffles=shuffles)
    for s in range(shuffles):
        perm = _rng(cfg.seed, s, _S_SHUFFLE).permutation(dataset.n)
        pooled_true, pooled_pred = [], []
        for f, (a, b) in enumerate(_fold_slices(dataset.n, folds)):
            test_idx = perm[a:b]
            train_idx = np.concatenate([perm[:a], perm[b:]])
            fold_seed = int(_rng(cfg.seed, s, f).integers(2 ** 31))
            fold_cfg = dataclasses.replace(cfg, seed=fold_seed)
            sub = Dataset(dataset.X[train_idx], dataset.y[train_idx],
                          dataset.feature_names, dataset.target_name)
            model = fit(sub, fold_cfg)
            preds = model.predict(dataset.X[test_idx])
            y_true = dataset.y[test_idx]
            pooled_true.append(y_true)
            pooled_pred.append(preds)
            report.folds.append(FoldResult(
                shuffle=s,
                fold=f,
                r2=linear.r2_score(y_true, preds) if len(y_true) >= 2 else None,
                mse=linear.mse(y_true, preds),
                node_count=model.metrics["node_count"],
                complexity=model.metrics["complexity"],
                corr_entanglement=model.metrics["corr_entanglement"],
            ))
        report.shuffle_r2.append(linear.r2_score(
            np.concatenate(pooled_true), np.concatenate(pooled_pred)))
    r2s = [f.r2 for f in report.folds if f.r2 is not None]
    report.median_r2 = float(np.median(r2s)) if r2s else float(np.median(report.shuffle_r2))
    report.median_mse = float(np.median([f.mse for f in report.folds]))
    report.median_node_count = float(np.median([f.node_count for f in report.folds]))
    report.median_complexity = float(np.median([f.complexity for f in report.folds]))
    report.median_corr = float(np.median([f.corr_entanglement for f in report.folds]))
    report.runtime_s = time.monotonic() - started
    return report


# ---------------------------------------------------------------------------
# report files

def _summary_rows(model: FittedModel) -> list:
    ind = model.individual
    rows = [{"feature": tree_to_string(t, with_weights=False), "beta": float(b)}
            for t, b in zip(ind.trees, ind.beta)]
    rows.sort(key=lambda r: -abs(r["beta"]))
    return rows


def emit_report(model: FittedModel, out_dir, fmt: str = "json",
                plot_data: bool = False) -> list:
    """Write archive, selected-model summary, and metrics; returns the paths.

    The summary lists features sorted by |beta| descending.  With plot_data,
    a (complexity, train score, validation score) CSV is added for plotting
    the accuracy/complexity front.
    """
    if fmt not in ("json", "csv"):
        raise ReportError(f"unknown report format {fmt!r}")
    if not model.archive_rows:
        raise ReportError("run produced no archive")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportError(f"cannot create output directory {out}: {e}")
    written = []

    path = out / "archive.jsonl"
    with open(path, "w") as fh:
        for row in model.archive_rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    written.append(path)

    path = out / "model.json"
    model.save(path)
    written.append(path)

    rows = _summary_rows(model)
    if fmt == "json":
        path = out / "summary.json"
        with open(path, "w") as fh:
            fh.write(dumps_canonical({
                "target": model.target_name,
                "intercept": float(model.individual.intercept),
                "features": rows,
            }))
    else:
        path = out / "summary.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature", "beta"])
            for r in rows:
                writer.writerow([r["feature"], repr(r["beta"])])
    written.append(path)

    path = out / "metrics.json"
    with open(path, "w") as fh:
        fh.write(dumps_canonical(model.metrics))
    written.append(path)

    if plot_data:
        path = out / "plot_data.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["complexity", "train_r2", "val_r2"])
            for row in model.archive_rows:
                writer.writerow([row["complexity"], repr(row["train_r2"]),
                                 repr(row["val_r2"])])
        written.append(path)
    return written


def emit_cv_report(report: CvReport, out_dir, fmt: str = "json") -> list:
    if fmt not in ("json", "csv"):
        raise ReportError(f"unknown report format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "cv_report.json"
    with open(path, "w") as fh:
        fh.write(dumps_canonical(report.to_dict()))
    written.append(path)
    if fmt == "csv":
        path = out / "cv_folds.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["shuffle", "fold", "r2", "mse", "node_count",
                             "complexity", "corr_entanglement"])
            for f in report.folds:
                writer.writerow([f.shuffle, f.fold,
                                 "" if f.r2 is None else repr(f.r2), repr(f.mse),
                                 f.node_count, f.complexity,
                                 repr(f.corr_entanglement)])
        written.append(path)
    return written
