"""Estimator-style bindings over the feat-forge engine.

The wrapper marshals arrays and configuration only; fitting, prediction,
scoring and archiving all run through the same code paths as the CLI, so a
given (data, config, seed) produces byte-identical model files either way.

    from featforge_estimator import FeatForgeRegressor

    est = FeatForgeRegressor(population_size=100, max_generations=20, seed=1)
    est.fit(X, y)
    y_hat = est.predict(X)
    est.save("model.json")
"""

from __future__ import annotations

import numpy as np

from featforge import RunConfig, SgdConfig, VariationConfig, from_arrays
from featforge.harness import fit as _fit
from featforge.model import FittedModel

__version__ = "0.1.0"
__all__ = ["FeatForgeRegressor", "NotFittedError"]


class NotFittedError(RuntimeError):
    pass


class FeatForgeRegressor:
    """fit / predict / score / archive facade over the native engine."""

    _PARAMS = (
        "population_size", "max_generations", "time_budget_s", "stall_window",
        "max_depth", "max_dim", "objectives", "strategy", "learning_rate",
        "sgd_iterations", "batch_size", "crossover_ratio", "feedback",
        "ridge_lambda", "val_fraction", "seed", "n_jobs",
    )

    def __init__(self, population_size=500, max_generations=200,
                 time_budget_s=3600.0, stall_window=50, max_depth=10,
                 max_dim=50, objectives=("mse", "complexity"),
                 strategy="lexnsga2", learning_rate=0.1, sgd_iterations=10,
                 batch_size=1000, crossover_ratio=0.25, feedback=0.75,
                 ridge_lambda=1e-3, val_fraction=0.25, seed=0, n_jobs=1):
        self.population_size = population_size
        self.max_generations = max_generations
        self.time_budget_s = time_budget_s
        self.stall_window = stall_window
        self.max_depth = max_depth
        self.max_dim = max_dim
        self.objectives = tuple(objectives)
        self.strategy = strategy
        self.learning_rate = learning_rate
        self.sgd_iterations = sgd_iterations
        self.batch_size = batch_size
        self.crossover_ratio = crossover_ratio
        self.feedback = feedback
        self.ridge_lambda = ridge_lambda
        self.val_fraction = val_fraction
        self.seed = seed
        self.n_jobs = n_jobs
        self._model: FittedModel | None = None

    # -- sklearn-style parameter plumbing ---------------------------------

    def get_params(self) -> dict:
        return {name: getattr(self, name) for name in self._PARAMS}

    def set_params(self, **params) -> "FeatForgeRegressor":
        for name, value in params.items():
            if name not in self._PARAMS:
                raise ValueError(f"unknown parameter {name!r}")
            setattr(self, name, value)
        return self

    def _run_config(self) -> RunConfig:
        return RunConfig(
            population_size=self.population_size,
            max_generations=self.max_generations,
            time_budget_s=self.time_budget_s,
            stall_window=self.stall_window,
            max_depth=self.max_depth,
            max_dim=self.max_dim,
            objectives=tuple(self.objectives),
            strategy=self.strategy,
            sgd=SgdConfig(learning_rate=self.learning_rate,
                          iterations=self.sgd_iterations,
                          batch_size=self.batch_size),
            variation=VariationConfig(crossover_ratio=self.crossover_ratio,
                                      feedback=self.feedback),
            ridge_lambda=self.ridge_lambda,
            seed=self.seed,
            val_fraction=self.val_fraction,
            n_jobs=self.n_jobs,
        )

    # -- estimator API -----------------------------------------------------

    def fit(self, X, y, feature_names=None, target_name="y") -> "FeatForgeRegressor":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D array of shape (n_samples, n_features)")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(
                f"y has {y.shape} values but X has {X.shape[0]} rows")
        dataset = from_arrays(X, y, feature_names=feature_names,
                              target_name=target_name)
        self._model = _fit(dataset, self._run_config())
        return self

    @property
    def model_(self) -> FittedModel:
        if self._model is None:
            raise NotFittedError("call fit before using the estimator")
        return self._model

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        expected = self.model_.n_features
        if X.ndim != 2 or X.shape[1] != expected:
            raise ValueError(
                f"X must have shape (n_samples, {expected}), got {X.shape}")
        return self.model_.predict(X)

    def score(self, X, y) -> float:
        return self.model_.score(X, np.asarray(y, dtype=np.float64))

    def archive(self) -> list:
        """Non-dominated (loss, complexity) entries recorded during the fit."""
        return list(self.model_.archive_rows)

    def expression(self, with_weights: bool = False) -> str:
        return self.model_.expression(with_weights)

    # -- persistence (same JSON file as the CLI) ---------------------------

    def save(self, path) -> None:
        self.model_.save(path)

    @classmethod
    def load(cls, path) -> "FeatForgeRegressor":
        model = FittedModel.load(path)
        cfg = model.config
        est = cls(
            population_size=cfg.population_size,
            max_generations=cfg.max_generations,
            time_budget_s=cfg.time_budget_s,
            stall_window=cfg.stall_window,
            max_depth=cfg.max_depth,
            max_dim=cfg.max_dim,
            objectives=tuple(cfg.objectives),
            strategy=cfg.strategy,
            learning_rate=cfg.sgd.learning_rate,
            sgd_iterations=cfg.sgd.iterations,
            batch_size=cfg.sgd.batch_size,
            crossover_ratio=cfg.variation.crossover_ratio,
            feedback=cfg.variation.feedback,
            ridge_lambda=cfg.ridge_lambda,
            val_fraction=cfg.val_fraction,
            seed=cfg.seed,
            n_jobs=cfg.n_jobs,
        )
        est._model = model
        return est
