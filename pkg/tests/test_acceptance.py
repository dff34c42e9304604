"""Acceptance suite: one test per release criterion, each printing PASS/FAIL.

Scales and tolerances are fixed here on purpose; they are the exit bar for
the library, not tunables.
"""

import math
import time

import numpy as np
from featforge import (FunctionSet, Limits, RunConfig, VariationConfig,
                       feedback_probs, from_arrays, parse, to_string)
from featforge.expr import individual_complexity, node_count, validate_individual
from featforge.harness import fit
from featforge.selection import (anneal_accept, case_epsilons,
                                 epsilon_lexicase_select, fast_nondominated_sort,
                                 nsga2_survive)
from featforge.variation import insert_mutation, make_offspring, random_individual

from conftest import make_random_individuals, synthetic_dataset
from test_evaluator import gradient_oracle_errors
from test_objectives import (cn_bruteforce, corr_bruteforce,
                             zero_mean_orthogonal_columns)
from test_selection import bruteforce_ranks


def report(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'}: {name}" + (f"  [{detail}]" if detail else ""))
    assert ok, f"{name}: {detail}"


class TestAcceptance:
    def test_gradient_oracle(self):
        started = time.monotonic()
        worst = gradient_oracle_errors(n_points=100, seed=20_240)
        elapsed = time.monotonic() - started
        worst_err = max(worst.values())
        report("gradient oracle (all kinds vs central differences, 1e-4)",
               worst_err < 1e-4 and elapsed < 10.0,
               f"max rel err {worst_err:.2e}, {elapsed:.1f}s")

    def test_feedback_probability_suite(self):
        rng = np.random.default_rng(20_241)
        ok = True
        for _ in range(1000):
            m = int(rng.integers(1, 12))
            beta = rng.normal(size=m) * 10.0 ** rng.integers(-3, 4)
            f = float(rng.random())
            pm = feedback_probs(beta, f)
            ok &= abs(float(pm.sum()) - 1.0) < 1e-12
            ok &= bool(np.all(pm >= 0.0) and np.all(pm <= 1.0))
            for i in range(m):
                for j in range(m):
                    if abs(beta[i]) < abs(beta[j]):
                        ok &= pm[i] >= pm[j]
            ok &= bool(np.allclose(pm, feedback_probs(3.7 * beta, f), atol=1e-12))
        hand = feedback_probs(np.array([0.0, 5.0]), 1.0)
        ok &= bool(np.allclose(hand, [0.73106, 0.26894], atol=1e-4))
        report("coefficient feedback suite (sum, monotonicity, scale, hand value)",
               ok, f"hand value {hand.round(5).tolist()}")

    def test_complexity_suite(self):
        fs = FunctionSet(4)
        leaf = individual_complexity(parse("[x0]", fs))
        nested = individual_complexity(parse("[tanh((x0+x1))]", fs))
        ok = leaf == 1 and nested == 8
        lim = Limits()
        rng = np.random.default_rng(20_242)
        _, _, pool = make_random_individuals(500, n_features=4, seed=20_243)
        for ind in pool:
            ind.beta = np.ones(ind.m)
        edits = 0
        while edits < 10_000:
            ind = pool[edits % len(pool)]
            before = individual_complexity(ind)
            child, _ = insert_mutation(ind, fs, 0.5, rng, lim)
            ok &= individual_complexity(child) >= before
            edits += 1
        report("complexity suite (leaf=1, tanh(x0+x1)=8, monotone over 1e4 edits)",
               ok, f"leaf={leaf}, nested={nested}")

    def test_entanglement_oracles(self):
        rng = np.random.default_rng(20_244)
        from featforge import cond_number, corr_entanglement
        worst_corr = worst_cn = 0.0
        for _ in range(100):
            phi = rng.normal(size=(50, 5))
            worst_corr = max(worst_corr,
                             abs(corr_entanglement(phi) - corr_bruteforce(phi)))
            cn, oracle = cond_number(phi), cn_bruteforce(phi)
            worst_cn = max(worst_cn, abs(cn - oracle) / max(1.0, oracle))
        ortho = cond_number(zero_mean_orthogonal_columns(50, 5, rng))
        ok = worst_corr < 1e-9 and worst_cn < 1e-9 and abs(ortho - 1.0) < 1e-9
        report("entanglement oracles (pairwise correlation + SVD, 1e-9)",
               ok, f"corr err {worst_corr:.1e}, cn err {worst_cn:.1e}, "
                   f"orthonormal CN {ortho:.12f}")

    def test_selection_suite(self):
        rng = np.random.default_rng(20_245)
        ok = True
        # non-dominated sort against a brute-force oracle
        for _ in range(100):
            n = int(rng.integers(1, 65))
            k = int(rng.integers(2, 4))
            F = np.round(rng.random((n, k)) * 5, 1)
            ranks, _ = fast_nondominated_sort(F)
            ok &= ranks.tolist() == bruteforce_ranks(F.tolist())
        # survival boundary and truncation behavior
        F = np.array([[0.0, 3.0], [1.0, 2.0], [2.0, 1.0], [3.0, 0.0],
                      [5.0, 5.0], [6.0, 6.0], [7.0, 7.0], [8.0, 8.0]])
        survivors, _, _ = nsga2_survive(F, 4)
        ok &= sorted(survivors) == [0, 1, 2, 3]
        F2 = np.array([[0.0, 10.0], [5.0, 5.0], [10.0, 0.0],
                       [2.0, 20.0], [11.0, 11.0], [20.0, 2.0]])
        survivors2, _, _ = nsga2_survive(F2, 5)
        ok &= set(survivors2) >= {0, 1, 2} and 4 not in survivors2
        # lexicase replay invariant over 1e4 selection events
        for trial in range(10_000):
            E = rng.random((12, 10))
            eps = case_epsilons(E)
            idx, trace = epsilon_lexicase_select(
                E, np.random.default_rng(trial), eps)
            pool = np.arange(12)
            for case, threshold in trace:
                pool = pool[E[pool, case] <= threshold]
                ok &= idx in pool
        # annealing acceptance frequency over 1e5 trials
        arng = np.random.default_rng(20_246)
        hits = sum(anneal_accept(1.0, 2.0, 1.0, arng) for _ in range(100_000))
        freq_err = abs(hits / 100_000 - math.exp(-1.0))
        ok &= freq_err < 0.01
        report("selection suite (sort oracle, survival, replay, annealing)",
               ok, f"anneal freq err {freq_err:.4f}")

    def test_closure_and_determinism(self):
        ok = True
        events = 0
        for n_features in (1, 3, 5, 8):
            fs = FunctionSet(n_features)
            lim = Limits(max_depth=10, max_dim=50)
            cfg = VariationConfig()
            rng = np.random.default_rng(20_247 + n_features)
            parents = [random_individual(fs, rng, cfg, lim) for _ in range(40)]
            for p in parents:
                p.beta = rng.normal(size=p.m)
            children, _ = make_offspring(parents, 25_000, fs, cfg, lim,
                                         (99, n_features, 1))
            for child in children:
                if validate_individual(child, n_features, 10, 50):
                    ok = False
            events += len(children)
        ok &= events == 100_000
        # identical seeds reproduce identical single-worker runs
        X, y = synthetic_dataset("tanh", 80, seed=20_248)
        data = from_arrays(X, y)
        cfg_run = RunConfig(population_size=16, max_generations=3, seed=5)
        m1 = fit(data, cfg_run)
        m2 = fit(data, cfg_run)
        ok &= m1.to_dict() == m2.to_dict() and m1.archive_rows == m2.archive_rows
        report("closure and determinism (1e5 variation events, seeded replays)",
               ok, f"{events} events")

    def test_baseline_guarantee(self):
        ok = True
        worst_gap = 0.0
        for strategy in ("lex", "nsga2", "lexnsga2", "simanneal", "random"):
            for run in range(20):
                kind = ("linear", "tanh", "square")[run % 3]
                X, y = synthetic_dataset(kind, 60, seed=500 + run)
                cfg = RunConfig(population_size=12, max_generations=2,
                                seed=run, strategy=strategy)
                model = fit(from_arrays(X, y), cfg)
                gap = model.metrics["val_mse"] - model.metrics["baseline_val_mse"]
                worst_gap = max(worst_gap, gap)
                ok &= gap <= 1e-12
        report("baseline guarantee (final val MSE <= initial linear model, "
               "5 strategies x 20 runs)", ok, f"worst gap {worst_gap:.2e}")

    def test_synthetic_recovery(self):
        started = time.monotonic()
        r2s, nodes = [], []
        for seed in range(5):
            rng = np.random.default_rng(3000 + seed)
            X = rng.normal(size=(1000, 5))
            noise = rng.normal(0.0, 0.01, 1000)
            y = 3.0 * np.tanh(X[:, 0]) + 2.0 * X[:, 1] ** 2 + X[:, 2] + noise
            X_test = rng.normal(size=(1000, 5))
            y_test = (3.0 * np.tanh(X_test[:, 0]) + 2.0 * X_test[:, 1] ** 2
                      + X_test[:, 2] + rng.normal(0.0, 0.01, 1000))
            cfg = RunConfig(population_size=100, max_generations=50,
                            strategy="lexnsga2", seed=seed, time_budget_s=280.0)
            model = fit(from_arrays(X, y), cfg)
            r2s.append(model.score(X_test, y_test))
            nodes.append(model.metrics["node_count"])
        elapsed = time.monotonic() - started
        median_r2 = float(np.median(r2s))
        median_nodes = float(np.median(nodes))
        ok = median_r2 >= 0.95 and median_nodes <= 25 and elapsed < 300.0
        report("synthetic recovery (tanh + square + linear target, 5 seeds)",
               ok, f"median R2 {median_r2:.4f}, median nodes {median_nodes:.0f}, "
                   f"{elapsed:.0f}s, per-seed nodes {nodes}")

    def test_archive_invariants(self):
        from featforge.engine import Evolution
        X, y = synthetic_dataset("square", 90, seed=20_249)
        evo = Evolution(X, y, RunConfig(population_size=16, max_generations=6,
                                        seed=2))
        evo.initialize()
        ok = True
        best = evo.archive.best_train_mse()
        fs = FunctionSet(3)
        for _ in range(6):
            evo.step()
            entries = evo.archive.entries
            for i, a in enumerate(entries):
                for j, b in enumerate(entries):
                    if i == j:
                        continue
                    ok &= not (b.train_mse <= a.train_mse
                               and b.complexity <= a.complexity
                               and (b.train_mse < a.train_mse
                                    or b.complexity < a.complexity))
            ok &= evo.archive.best_train_mse() <= best + 1e-15
            best = evo.archive.best_train_mse()
        from featforge.archive import export_entries
        rows = export_entries(evo.archive.entries, evo.X_train, evo.y_train,
                              evo.X_val, evo.y_val)
        for row in rows:
            back = parse(row["expression"], fs)
            ok &= to_string(back) == row["expression"]
        report("archive invariants (non-dominance, monotone best, export "
               "round-trip)", ok, f"{len(rows)} entries")
