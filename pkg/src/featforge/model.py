"""Fitted model packaging: prediction, scoring, canonical JSON save/load."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from . import linear
from .archive import export_entries
from .objectives import corr_entanglement
from .engine import RunConfig, RunResult
from .evaluator import SgdConfig, forward
from .expr import FunctionSet, Individual, node_count, parse, to_string
from .linear import Standardizer
from .selection import AnnealSchedule
from .variation import VariationConfig

FORMAT_VERSION = 1


class ModelError(Exception):
    pass


def config_to_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["objectives"] = list(cfg.objectives)
    d["variation"]["mutation_weights"] = list(cfg.variation.mutation_weights)
    d["variation"]["crossover_weights"] = list(cfg.variation.crossover_weights)
    return d


def config_from_dict(d: dict) -> RunConfig:
    d = dict(d)
    d["objectives"] = tuple(d["objectives"])
    d["sgd"] = SgdConfig(**d["sgd"])
    var = dict(d["variation"])
    var["mutation_weights"] = tuple(var["mutation_weights"])
    var["crossover_weights"] = tuple(var["crossover_weights"])
    d["variation"] = VariationConfig(**var)
    d["anneal"] = AnnealSchedule(**d["anneal"])
    return RunConfig(**d)


@dataclass
class FittedModel:
    individual: Individual
    standardizer: Standardizer
    feature_names: list
    target_name: str
    config: RunConfig
    archive_rows: list
    metrics: dict

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelError(
                f"expected {self.n_features} feature columns, got shape {X.shape}")
        Xs = linear.standardize_apply(self.standardizer, X)
        phi = forward(self.individual, Xs)
        return phi @ self.individual.beta + self.individual.intercept

    def score(self, X, y) -> float:
        return linear.r2_score(np.asarray(y, dtype=np.float64), self.predict(X))

    def expression(self, with_weights: bool = True) -> str:
        return to_string(self.individual, with_weights)

    def to_dict(self) -> dict:
        ind = self.individual
        # runtime varies between identical runs; keep the file deterministic
        metrics = {k: v for k, v in self.metrics.items() if k != "runtime_s"}
        return {
            "format_version": FORMAT_VERSION,
            "expressions": [to_string(Individual(trees=[t])) for t in ind.trees],
            "node_weights": [
                [[float(w) for w in n.weights] for n in t.nodes if n.weights is not None]
                for t in ind.trees
            ],
            "beta": [float(b) for b in ind.beta],
            "intercept": float(ind.intercept),
            "standardizer": {
                "means": [float(v) for v in self.standardizer.means],
                "stds": [float(v) for v in self.standardizer.stds],
                "constant": [bool(v) for v in self.standardizer.constant],
            },
            "feature_names": list(self.feature_names),
            "target_name": self.target_name,
            "config": config_to_dict(self.config),
            "metrics": metrics,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(dumps_canonical(self.to_dict()))

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ModelError(f"unsupported model format {d.get('format_version')!r}")
        cfg = config_from_dict(d["config"])
        n_features = len(d["feature_names"])
        fs = FunctionSet(n_features, cfg.complexity_weights)
        trees = []
        for expr, weights in zip(d["expressions"], d["node_weights"]):
            tree = parse(expr, fs).trees[0]
            stored = iter(weights)
            for node in tree.nodes:
                if node.weights is not None:
                    node.weights = [float(w) for w in next(stored)]
            trees.append(tree)
        ind = Individual(trees=trees, beta=np.array(d["beta"], dtype=np.float64),
                         intercept=float(d["intercept"]))
        std = Standardizer(
            means=np.array(d["standardizer"]["means"], dtype=np.float64),
            stds=np.array(d["standardizer"]["stds"], dtype=np.float64),
            constant=np.array(d["standardizer"]["constant"], dtype=bool),
        )
        return cls(ind, std, list(d["feature_names"]), d["target_name"], cfg,
                   [], dict(d.get("metrics", {})))

    @classmethod
    def load(cls, path) -> "FittedModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def package_run(result: RunResult, cfg: RunConfig, target_name: str) -> FittedModel:
    """Assemble the user-facing model from an engine run."""
    evo = result.evolution
    rows = export_entries(result.archive.entries, evo.X_train, evo.y_train,
                          evo.X_val, evo.y_val)
    ind = result.individual
    phi_tr = forward(ind, evo.X_train)
    preds_tr = phi_tr @ ind.beta + ind.intercept
    phi_val = forward(ind, evo.X_val)
    preds_val = phi_val @ ind.beta + ind.intercept
    metrics = {
        "train_mse": linear.mse(evo.y_train, preds_tr),
        "train_r2": linear.r2_score(evo.y_train, preds_tr),
        "val_mse": linear.mse(evo.y_val, preds_val),
        "val_r2": linear.r2_score(evo.y_val, preds_val),
        "baseline_val_mse": float(
            np.mean((forward(result.baseline.individual, evo.X_val)
                     @ result.baseline.individual.beta
                     + result.baseline.individual.intercept - evo.y_val) ** 2)),
        "node_count": node_count(ind),
        "complexity": int(ind.complexity if ind.complexity is not None
                          else result.entry.complexity),
        "corr_entanglement": corr_entanglement(phi_tr),
        "generations": result.generations,
        "runtime_s": result.runtime_s,
    }
    model = FittedModel(
        individual=ind,
        standardizer=result.standardizer,
        feature_names=result.feature_names,
        target_name=target_name,
        config=cfg,
        archive_rows=rows,
        metrics=metrics,
    )
    return model
