"""The evolutionary loop: initialization, generation stepping, termination.

Every random decision draws from a private stream keyed by
(seed, generation, purpose, index), so runs are reproducible even when
individuals are evaluated on a worker pool.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import linear
from .archive import ArchiveEntry, ParetoArchive, select_final
from .evaluator import (EvaluationError, SgdConfig, forward,
                        has_trainable_weights, train)
from .expr import (FunctionSet, Individual, Node, Tree, individual_complexity,
                   validate_individual)
from .linear import FitError, Standardizer, ridge_fit, standardize_apply, standardize_fit
from .objectives import ObjectiveSet, WORST_FITNESS, evaluate, worst_case
from .selection import (AnnealSchedule, anneal_accept, case_epsilons,
                        epsilon_lexicase_select, lex_survive, nsga2_survive,
                        shared_tree_count)
from .variation import Limits, VariationConfig, make_offspring, random_individual

STRATEGIES = ("lex", "nsga2", "lexnsga2", "simanneal", "random")

# stream purposes for seed derivation
_S_SPLIT, _S_INIT, _S_SELECT, _S_CHILD, _S_EVAL, _S_ANNEAL, _S_PARENT = range(7)

STALL_REL_TOL = 1e-6


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(tuple(int(k) for k in key))


@dataclass
class RunConfig:
    population_size: int = 500
    max_generations: int = 200
    time_budget_s: float = 3600.0
    stall_window: int = 50
    max_depth: int = 10
    max_dim: int = 50
    objectives: tuple = ("mse", "complexity")
    strategy: str = "lexnsga2"
    sgd: SgdConfig = field(default_factory=SgdConfig)
    variation: VariationConfig = field(default_factory=VariationConfig)
    ridge_lambda: float = 1e-3
    seed: int = 0
    val_fraction: float = 0.25
    lexicase_case_cap: int = 1000
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    complexity_weights: dict | None = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if min(self.max_generations, self.stall_window, self.max_depth,
               self.max_dim, self.lexicase_case_cap, self.n_jobs) < 0:
            raise ValueError("counts must be non-negative")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")
        ObjectiveSet(tuple(self.objectives))  # fail fast on bad objective sets


def split_validation(n: int, fraction: float, seed: int):
    """Shuffled split; the last-drawn fraction becomes the hold-out set."""
    perm = _rng(seed, 0, _S_SPLIT).permutation(n)
    n_val = max(1, int(round(n * fraction)))
    if n_val >= n:
        raise ValueError("not enough rows to carve out a validation split")
    return np.sort(perm[:n - n_val]), np.sort(perm[n - n_val:])


def _quarantine(ind: Individual, n_cases: int, objectives: ObjectiveSet) -> Individual:
    ind.fitness = worst_case(objectives)
    ind.complexity = individual_complexity(ind)
    ind.train_mse = None
    ind.val_mse = np.inf
    ind.case_errors = np.full(n_cases, WORST_FITNESS)
    return ind


def evaluate_one(ind: Individual, X_tr, y_tr, X_val, y_val, cfg: RunConfig,
                 objectives: ObjectiveSet, rng_key: tuple) -> Individual:
    """Forward, ridge fit, SGD with frozen beta, ridge refit, objectives.

    Failures quarantine the individual with worst-case fitness instead of
    aborting the generation.
    """
    try:
        phi = forward(ind, X_tr)
        lm = ridge_fit(phi, y_tr, cfg.ridge_lambda)
        ind.beta, ind.intercept = lm.beta, lm.intercept
        if cfg.sgd.iterations > 0 and has_trainable_weights(ind):
            ind = train(ind, X_tr, y_tr, cfg.sgd, _rng(*rng_key))
            phi = forward(ind, X_tr)
            lm = ridge_fit(phi, y_tr, cfg.ridge_lambda)
            ind.beta, ind.intercept = lm.beta, lm.intercept
        preds = phi @ ind.beta + ind.intercept
        resid = y_tr - preds
        ind.case_errors = resid * resid
        ind.train_mse = float(np.mean(ind.case_errors))
        ind.complexity = individual_complexity(ind)
        ind.fitness = evaluate(ind, X_tr, y_tr, objectives, phi=phi)
        val_preds = forward(ind, X_val) @ ind.beta + ind.intercept
        ind.val_mse = linear.mse(y_val, val_preds)
        if not np.isfinite(ind.train_mse) or not np.isfinite(ind.val_mse):
            return _quarantine(ind, len(y_tr), objectives)
        return ind
    except (FitError, EvaluationError, FloatingPointError, np.linalg.LinAlgError):
        return _quarantine(ind, len(y_tr), objectives)


class Evolution:
    """Owns the population state for one run on a fixed training set."""

    def __init__(self, X: np.ndarray, y: np.ndarray, cfg: RunConfig,
                 feature_names=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X must be 2-D with one row per target value")
        if X.shape[1] < 1:
            raise ValueError("need at least one input feature")
        self.cfg = cfg
        self.feature_names = (list(feature_names) if feature_names
                              else [f"x{j}" for j in range(X.shape[1])])
        self.standardizer: Standardizer = standardize_fit(X)
        Xs = standardize_apply(self.standardizer, X)
        tr, va = split_validation(X.shape[0], cfg.val_fraction, cfg.seed)
        self.X_train, self.y_train = Xs[tr], y[tr]
        self.X_val, self.y_val = Xs[va], y[va]
        self.fs = FunctionSet(X.shape[1], cfg.complexity_weights)
        self.limits = Limits(cfg.max_depth, cfg.max_dim)
        self.objectives = ObjectiveSet(tuple(cfg.objectives))
        self.archive = ParetoArchive()
        self.population: list[Individual] = []
        self.generation = 0
        self.baseline: ArchiveEntry | None = None
        self._terminal_probs = None
        self._stall = 0
        self._best_median_val = np.inf

    # -- evaluation -------------------------------------------------------

    def _evaluate(self, individuals: list) -> list:
        keys = [(self.cfg.seed, self.generation, _S_EVAL, i)
                for i in range(len(individuals))]
        if self.cfg.n_jobs <= 1:
            return [evaluate_one(ind, self.X_train, self.y_train, self.X_val,
                                 self.y_val, self.cfg, self.objectives, key)
                    for ind, key in zip(individuals, keys)]
        from joblib import Parallel, delayed
        return Parallel(n_jobs=self.cfg.n_jobs)(
            delayed(evaluate_one)(ind, self.X_train, self.y_train, self.X_val,
                                  self.y_val, self.cfg, self.objectives, key)
            for ind, key in zip(individuals, keys))

    def _track_stall(self):
        median = float(np.median([ind.val_mse for ind in self.population]))
        if median < self._best_median_val * (1.0 - STALL_REL_TOL):
            self._best_median_val = median
            self._stall = 0
        else:
            self._stall += 1

    # -- initialization ---------------------------------------------------

    def _identity_individual(self) -> Individual:
        d = self.fs.n_features
        indices = range(d)
        if d > self.cfg.max_dim:
            lm = ridge_fit(self.X_train, self.y_train, self.cfg.ridge_lambda)
            order = np.argsort(-np.abs(lm.beta), kind="stable")
            indices = sorted(order[:self.cfg.max_dim].tolist())
        return Individual(trees=[Tree([Node(self.fs.terminal(j))]) for j in indices])

    def initialize(self):
        """Identity individual plus P-1 random ones biased toward useful inputs."""
        lm = ridge_fit(self.X_train, self.y_train, self.cfg.ridge_lambda)
        total = np.sum(np.abs(lm.beta))
        if total > 0:
            self._terminal_probs = np.abs(lm.beta) / total
        rng = _rng(self.cfg.seed, 0, _S_INIT)
        pop = [self._identity_individual()]
        probs = self._terminal_probs
        if probs is not None and len(probs) != self.fs.n_features:
            probs = None
        for _ in range(self.cfg.population_size - 1):
            pop.append(random_individual(self.fs, rng, self.cfg.variation,
                                         self.limits, terminal_probs=probs))
        self.population = self._evaluate(pop)
        self.archive.update(self.population)
        first = self.population[0]
        if first.train_mse is None:
            raise FitError("initial linear model failed to fit")
        self.baseline = ArchiveEntry(first.clone(), int(first.complexity),
                                     float(first.train_mse))
        self._track_stall()
        return self.population

    # -- parents ----------------------------------------------------------

    def _lexicase_parents(self) -> list:
        E = np.stack([ind.case_errors for ind in self.population])
        eps = case_epsilons(E)
        n_cases = E.shape[1]
        cap = self.cfg.lexicase_case_cap
        parents = []
        for i in range(self.cfg.population_size):
            rng = _rng(self.cfg.seed, self.generation, _S_SELECT, i)
            if n_cases > cap:
                cases = rng.choice(n_cases, size=cap, replace=False)
                idx, _ = epsilon_lexicase_select(E[:, cases], rng, eps[cases])
            else:
                idx, _ = epsilon_lexicase_select(E, rng, eps)
            parents.append(self.population[idx])
        return parents

    def _uniform_parents(self) -> list:
        rng = _rng(self.cfg.seed, self.generation, _S_PARENT)
        return [self.population[rng.integers(len(self.population))]
                for _ in range(self.cfg.population_size)]

    # -- one generation ----------------------------------------------------

    def step(self):
        """Select, vary, evaluate, survive, archive; returns the new population."""
        self.generation += 1
        cfg = self.cfg
        P = cfg.population_size
        if cfg.strategy == "random":
            rng = _rng(cfg.seed, self.generation, _S_INIT)
            pop = [random_individual(self.fs, rng, cfg.variation, self.limits,
                                     terminal_probs=self._terminal_probs)
                   for _ in range(P)]
            self.population = self._evaluate(pop)
            self.archive.update(self.population)
            self._track_stall()
            return self.population

        if cfg.strategy in ("lex", "lexnsga2"):
            parents = self._lexicase_parents()
        elif cfg.strategy == "nsga2":
            parents = self._uniform_parents()
        else:  # simanneal: each slot breeds
            parents = list(self.population)

        offspring, provenance = make_offspring(
            parents, P, self.fs, cfg.variation, self.limits,
            (cfg.seed, self.generation, _S_CHILD))
        offspring = self._evaluate(offspring)
        self.archive.update(offspring)

        if cfg.strategy == "lex":
            self.population = lex_survive(self.population, offspring,
                                          key=lambda ind: ind.fitness[0])
        elif cfg.strategy in ("nsga2", "lexnsga2"):
            union = self.population + offspring
            F = np.stack([ind.fitness for ind in union])
            survivors, ranks, crowd = nsga2_survive(F, P)
            for i, ind in enumerate(union):
                ind.rank = int(ranks[i])
                ind.crowd_dist = float(crowd[i])
            self.population = [union[i] for i in survivors]
        else:  # simanneal
            t = self.cfg.anneal.temperature(self.generation - 1)
            new_pop = list(self.population)
            for i, (child, prov) in enumerate(zip(offspring, provenance)):
                ia, ib = prov["parents"]
                slot = ia
                if ib is not None and ib != ia:
                    if (shared_tree_count(child, parents[ib])
                            > shared_tree_count(child, parents[ia])):
                        slot = ib
                rng = _rng(cfg.seed, self.generation, _S_ANNEAL, i)
                if anneal_accept(float(parents[slot].fitness[0]),
                                 float(child.fitness[0]), t, rng):
                    new_pop[slot] = child
            self.population = new_pop

        self._track_stall()
        return self.population

    # -- full run -----------------------------------------------------------

    def should_stop(self, started: float) -> bool:
        return (self.generation >= self.cfg.max_generations
                or time.monotonic() - started >= self.cfg.time_budget_s
                or self._stall >= self.cfg.stall_window)

    def run(self):
        started = time.monotonic()
        if not self.population:
            self.initialize()
        while not self.should_stop(started):
            self.step()
        final = select_final(self.archive.entries + [self.baseline],
                             self.X_val, self.y_val)
        return RunResult(
            individual=final.individual.clone(),
            entry=final,
            archive=self.archive,
            baseline=self.baseline,
            standardizer=self.standardizer,
            feature_names=self.feature_names,
            generations=self.generation,
            runtime_s=time.monotonic() - started,
            evolution=self,
        )

    def check_population_invariants(self):
        """Debug helper: every individual valid, fitness complete, |pop| = P."""
        problems = []
        if len(self.population) != self.cfg.population_size:
            problems.append(f"population size {len(self.population)}")
        for i, ind in enumerate(self.population):
            v = validate_individual(ind, self.fs.n_features, self.cfg.max_depth,
                                    self.cfg.max_dim)
            if v:
                problems.append(f"individual {i}: {v}")
            if ind.fitness is None or len(ind.fitness) != len(self.objectives):
                problems.append(f"individual {i}: incomplete fitness")
        return problems


@dataclass
class RunResult:
    individual: Individual
    entry: ArchiveEntry
    archive: ParetoArchive
    baseline: ArchiveEntry
    standardizer: Standardizer
    feature_names: list
    generations: int
    runtime_s: float
    evolution: Evolution
