import numpy as np
import pytest

from featforge import RunConfig, from_arrays, to_string
from featforge.engine import Evolution, split_validation
from featforge.harness import fit

from conftest import synthetic_dataset


def small_cfg(**kw):
    base = dict(population_size=16, max_generations=3, seed=0,
                time_budget_s=60.0, strategy="lexnsga2")
    base.update(kw)
    return RunConfig(**base)


class TestSplit:
    def test_sizes_and_disjoint(self):
        tr, va = split_validation(100, 0.25, seed=1)
        assert len(tr) == 75 and len(va) == 25
        assert not set(tr) & set(va)
        assert sorted(set(tr) | set(va)) == list(range(100))

    def test_seed_changes_split(self):
        tr1, _ = split_validation(100, 0.25, seed=1)
        tr2, _ = split_validation(100, 0.25, seed=2)
        assert not np.array_equal(tr1, tr2)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            split_validation(1, 0.5, seed=0)


class TestInitialize:
    def test_population_size_and_identity_head(self):
        X, y = synthetic_dataset("linear", 60, seed=0)
        evo = Evolution(X, y, small_cfg())
        pop = evo.initialize()
        assert len(pop) == 16
        assert to_string(pop[0], with_weights=False) == "[x0][x1][x2]"
        assert pop[0].beta is not None

    def test_terminal_bias_follows_coefficients(self):
        # y depends only on x0, so random individuals should lean on x0
        rng = np.random.default_rng(1)
        X = rng.normal(size=(200, 3))
        y = 5.0 * X[:, 0]
        evo = Evolution(X, y, small_cfg(population_size=64))
        pop = evo.initialize()
        counts = np.zeros(3)
        for ind in pop[1:]:
            for tree in ind.trees:
                for node in tree.nodes:
                    if node.kind.is_terminal:
                        counts[node.feature_index] += 1
        assert counts[0] / counts.sum() >= 0.9

    def test_deterministic(self):
        X, y = synthetic_dataset("linear", 60, seed=2)
        a = Evolution(X, y, small_cfg()).initialize()
        b = Evolution(X, y, small_cfg()).initialize()
        assert all(p == q for p, q in zip(a, b))

    def test_all_evaluated_and_valid(self):
        X, y = synthetic_dataset("tanh", 80, seed=3)
        evo = Evolution(X, y, small_cfg())
        evo.initialize()
        assert evo.check_population_invariants() == []


class TestStep:
    @pytest.mark.parametrize("strategy", ["lex", "nsga2", "lexnsga2",
                                          "simanneal", "random"])
    def test_population_invariants_every_generation(self, strategy):
        X, y = synthetic_dataset("square", 70, seed=4)
        evo = Evolution(X, y, small_cfg(strategy=strategy))
        evo.initialize()
        for _ in range(3):
            evo.step()
            assert evo.check_population_invariants() == [], strategy

    def test_archive_best_loss_monotone(self):
        X, y = synthetic_dataset("tanh", 80, seed=5)
        evo = Evolution(X, y, small_cfg(max_generations=5))
        evo.initialize()
        best = evo.archive.best_train_mse()
        for _ in range(5):
            evo.step()
            assert evo.archive.best_train_mse() <= best + 1e-15
            best = evo.archive.best_train_mse()

    def test_archive_nondominated_every_generation(self):
        X, y = synthetic_dataset("square", 70, seed=6)
        evo = Evolution(X, y, small_cfg())
        evo.initialize()
        for _ in range(3):
            evo.step()
            entries = evo.archive.entries
            for i, a in enumerate(entries):
                for j, b in enumerate(entries):
                    if i != j:
                        assert not (b.train_mse <= a.train_mse
                                    and b.complexity <= a.complexity
                                    and (b.train_mse < a.train_mse
                                         or b.complexity < a.complexity))

    def test_random_strategy_replaces_population(self):
        X, y = synthetic_dataset("linear", 60, seed=7)
        evo = Evolution(X, y, small_cfg(strategy="random"))
        evo.initialize()
        before = [to_string(i) for i in evo.population]
        evo.step()
        after = [to_string(i) for i in evo.population]
        assert before != after


class TestRun:
    def test_zero_generations_returns_at_least_linear(self):
        X, y = synthetic_dataset("tanh", 80, seed=8)
        data = from_arrays(X, y)
        model = fit(data, small_cfg(max_generations=0))
        assert model.metrics["val_mse"] <= model.metrics["baseline_val_mse"] + 1e-12

    def test_noiseless_linear_recovered_fast(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(120, 2))
        y = 3.0 * X[:, 0] + 2.0 * X[:, 1]
        model = fit(from_arrays(X, y), small_cfg(max_generations=5))
        assert model.metrics["val_r2"] >= 0.999

    @pytest.mark.parametrize("strategy", ["lex", "nsga2", "lexnsga2",
                                          "simanneal", "random"])
    def test_final_never_worse_than_initial_linear(self, strategy):
        X, y = synthetic_dataset("square", 90, seed=10)
        model = fit(from_arrays(X, y), small_cfg(strategy=strategy))
        assert model.metrics["val_mse"] <= model.metrics["baseline_val_mse"] + 1e-12

    def test_determinism_end_to_end(self):
        X, y = synthetic_dataset("tanh", 80, seed=11)
        data = from_arrays(X, y)
        m1 = fit(data, small_cfg(max_generations=4))
        m2 = fit(data, small_cfg(max_generations=4))
        assert m1.to_dict() == m2.to_dict()
        assert m1.archive_rows == m2.archive_rows

    def test_different_seeds_differ(self):
        X, y = synthetic_dataset("tanh", 80, seed=12)
        data = from_arrays(X, y)
        m1 = fit(data, small_cfg(max_generations=4, seed=0))
        m2 = fit(data, small_cfg(max_generations=4, seed=1))
        assert m1.to_dict() != m2.to_dict()

    def test_parallel_matches_serial(self):
        X, y = synthetic_dataset("square", 80, seed=13)
        data = from_arrays(X, y)
        serial = fit(data, small_cfg(max_generations=2, n_jobs=1))
        parallel = fit(data, small_cfg(max_generations=2, n_jobs=2))
        ds, dp = serial.to_dict(), parallel.to_dict()
        ds["config"].pop("n_jobs")
        dp["config"].pop("n_jobs")
        assert ds == dp
        assert serial.archive_rows == parallel.archive_rows

    def test_stall_window_stops_early(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(60, 2))
        y = 2.0 * X[:, 0]  # solved immediately, medians stop improving
        model = fit(from_arrays(X, y),
                    small_cfg(max_generations=50, stall_window=2))
        assert model.metrics["generations"] < 50

    def test_time_budget_stops(self):
        X, y = synthetic_dataset("tanh", 80, seed=15)
        model = fit(from_arrays(X, y),
                    small_cfg(max_generations=500, time_budget_s=0.0))
        assert model.metrics["generations"] == 0

    def test_objective_variants_run(self):
        X, y = synthetic_dataset("square", 70, seed=16)
        data = from_arrays(X, y)
        for objectives in (("mse", "complexity", "corr"),
                           ("mse", "complexity", "cn")):
            model = fit(data, small_cfg(max_generations=2, objectives=objectives))
            assert model.metrics["val_mse"] <= model.metrics["baseline_val_mse"] + 1e-12


class TestConfig:
    def test_rejects_unknown_strategy(self):
        with pytest.raises(ValueError):
            RunConfig(strategy="tournament")

    def test_rejects_bad_objectives(self):
        with pytest.raises(ValueError):
            RunConfig(objectives=("complexity", "mse"))

    def test_rejects_tiny_population(self):
        with pytest.raises(ValueError):
            RunConfig(population_size=1)
