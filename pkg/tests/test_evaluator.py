import math

import numpy as np
import pytest

from featforge import FunctionSet, SgdConfig, forward, parse, to_string
from featforge.evaluator import (has_trainable_weights, sgd_step, train,
                                 tree_backward, tree_forward)
from featforge.expr import Node, Tree
from featforge.linear import ridge_fit


def _rel_err(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _weight_grad_fd(tree, X, node_idx, slot, h=1e-5):
    """Central difference of the tree output w.r.t. one weight, at one row."""
    w0 = tree.nodes[node_idx].weights[slot]
    tree.nodes[node_idx].weights[slot] = w0 + h
    hi, _ = tree_forward(tree, X)
    tree.nodes[node_idx].weights[slot] = w0 - h
    lo, _ = tree_forward(tree, X)
    tree.nodes[node_idx].weights[slot] = w0
    return (hi[0] - lo[0]) / (2 * h)


def _input_grad_fd(tree, X, col, h=1e-5):
    Xp = X.copy()
    Xp[0, col] += h
    hi, _ = tree_forward(tree, Xp)
    Xp[0, col] -= 2 * h
    lo, _ = tree_forward(tree, Xp)
    return (hi[0] - lo[0]) / (2 * h)


def _safe_point(rng):
    # stay away from protected-op singularities at 0 and the relu kink
    v = rng.uniform(0.5, 2.0)
    return v if rng.random() < 0.5 else -v


def gradient_oracle_errors(n_points=100, seed=0):
    """Max relative error between analytic and numeric gradients per kind."""
    fs = FunctionSet(2)
    rng = np.random.default_rng(seed)
    worst = {}
    for kind in fs.continuous_functions:
        errs = []
        for _ in range(n_points):
            nodes = [Node(fs.terminal(j)) for j in range(kind.arity)]
            weights = [rng.uniform(0.5, 1.5) for _ in range(kind.arity)]
            tree = Tree(nodes + [Node(kind, weights)])
            X = np.array([[_safe_point(rng), _safe_point(rng)]])
            out, cache = tree_forward(tree, X, need_cache=True)
            grads = tree_backward(tree, cache, np.ones(1),
                                  input_grads=(ig := np.zeros((1, 2))))
            for slot in range(kind.arity):
                analytic = grads[-1][slot]
                numeric = _weight_grad_fd(tree, X, len(nodes), slot)
                errs.append(_rel_err(analytic, numeric))
            for col in range(kind.arity):
                errs.append(_rel_err(ig[0, col], _input_grad_fd(tree, X, col)))
        worst[kind.name] = max(errs)
    return worst


class TestForward:
    def test_identity_representation(self):
        fs = FunctionSet(3)
        ind = parse("[x0][x1][x2]", fs)
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 3))
        assert np.array_equal(forward(ind, X), X)

    def test_weighted_sum_column(self):
        fs = FunctionSet(2)
        ind = parse("[({2.0}x0+{3.0}x1)]", fs)
        X = np.array([[1.0, 1.0], [2.0, -1.0]])
        assert np.allclose(forward(ind, X)[:, 0], 2 * X[:, 0] + 3 * X[:, 1])

    def test_tanh_value(self):
        fs = FunctionSet(1)
        ind = parse("[tanh(x0)]", fs)
        X = np.array([[0.0], [1.0]])
        assert np.allclose(forward(ind, X)[:, 0], [0.0, math.tanh(1.0)], atol=1e-15)

    def test_pure_bitwise_repeatable(self):
        fs, _, inds = __import__("conftest").make_random_individuals(20, 4, seed=9)
        rng = np.random.default_rng(1)
        X = rng.normal(size=(50, 4))
        for ind in inds:
            a = forward(ind, X)
            b = forward(ind, X)
            assert np.array_equal(a, b)

    def test_protected_ops_total(self):
        fs = FunctionSet(2)
        X = np.array([[0.0, 0.0], [1e8, -1e8], [-5.0, 1e-12]])
        for text in ("[(x0/x1)]", "[log(x0)]", "[sqrt(x0)]", "[(x0^x1)]",
                     "[exp(x0)]", "[logit(x0)]", "[gauss(x0)]"):
            phi = forward(parse(text, fs), X)
            assert np.all(np.isfinite(phi)), text

    def test_division_protected_form(self):
        fs = FunctionSet(2)
        phi = forward(parse("[(x0/x1)]", fs), np.array([[3.0, 2.0]]))
        assert np.allclose(phi[0, 0], 3.0 * 2.0 / (4.0 + 1e-9))

    def test_boolean_columns_are_zero_one(self):
        fs = FunctionSet(2)
        ind = parse("[((x0<x1) or (x0>x1))]", fs)
        rng = np.random.default_rng(2)
        phi = forward(ind, rng.normal(size=(30, 2)))
        assert set(np.unique(phi)) <= {0.0, 1.0}

    def test_feature_out_of_range(self):
        from featforge.evaluator import EvaluationError
        fs = FunctionSet(4)
        ind = parse("[x3]", fs)
        with pytest.raises(EvaluationError):
            forward(ind, np.zeros((3, 2)))


class TestGradientOracle:
    def test_all_kinds_match_finite_differences(self):
        worst = gradient_oracle_errors(n_points=100, seed=42)
        for name, err in worst.items():
            assert err < 1e-4, f"{name}: relative error {err}"


class TestSgdStep:
    def test_hand_chain_rule_value(self):
        # relu passes x0=1 through untouched, so the fitted layer sees phi=1:
        # residual 1, d loss/d w = -2 * r * beta * x0 = -2, step 0.1 -> w = 1.2
        fs = FunctionSet(1)
        ind = parse("[relu(x0)]", fs)
        X = np.array([[1.0]])
        y = np.array([2.0])
        sgd_step(ind, X, y, np.array([1.0]), 0.0, 0.1)
        assert abs(ind.trees[0].nodes[1].weights[0] - 1.2) < 1e-12

    def test_hand_value_cross_checked_with_fd(self):
        fs = FunctionSet(1)
        ind = parse("[relu(x0)]", fs)
        X = np.array([[1.0]])
        y = np.array([2.0])
        h = 1e-6

        def loss(w):
            probe = parse(f"[relu({{{w!r}}}x0)]", fs)
            return float((y[0] - forward(probe, X)[0, 0]) ** 2)

        fd = (loss(1 + h) - loss(1 - h)) / (2 * h)
        assert abs(fd - (-2.0)) < 1e-6

    def test_zero_residual_leaves_weights(self):
        fs = FunctionSet(1)
        ind = parse("[tanh(x0)]", fs)
        X = np.array([[0.3], [1.2], [-0.7]])
        beta = np.array([2.0])
        y = 2.0 * np.tanh(X[:, 0])
        sgd_step(ind, X, y, beta, 0.0, 0.1)
        assert ind.trees[0].nodes[1].weights[0] == 1.0

    def test_zero_beta_tree_untouched(self):
        fs = FunctionSet(2)
        ind = parse("[tanh(x0)][tanh(x1)]", fs)
        X = np.array([[0.5, 0.5], [1.0, -1.0]])
        y = np.array([3.0, -1.0])
        sgd_step(ind, X, y, np.array([1.5, 0.0]), 0.0, 0.1)
        assert ind.trees[1].nodes[1].weights[0] == 1.0
        assert ind.trees[0].nodes[1].weights[0] != 1.0


class TestTrain:
    def _fitted(self, text, X, y, lam=1e-3):
        fs = FunctionSet(X.shape[1])
        ind = parse(text, fs)
        lm = ridge_fit(forward(ind, X), y, lam)
        ind.beta, ind.intercept = lm.beta, lm.intercept
        return ind

    def test_zero_iterations_identity(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 1))
        y = np.tanh(X[:, 0])
        ind = self._fitted("[tanh({0.4}x0)]", X, y)
        out = train(ind, X, y, SgdConfig(iterations=0), rng)
        assert out == ind

    def test_boolean_only_untrained(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 2))
        y = (X[:, 0] < X[:, 1]).astype(float)
        ind = self._fitted("[(x0<x1)]", X, y)
        assert not has_trainable_weights(ind)
        out = train(ind, X, y, SgdConfig(), rng)
        assert out == ind

    def test_structure_never_changes(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(60, 2))
        y = 2 * np.tanh(X[:, 0]) + X[:, 1]
        ind = self._fitted("[tanh({0.3}x0)][({0.8}x1+{0.1}x0)]", X, y)
        out = train(ind, X, y, SgdConfig(), rng)
        assert to_string(out, with_weights=False) == to_string(ind, with_weights=False)
        assert out != ind  # weights moved

    def test_loss_decreases_statistically(self):
        wins = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(120, 1))
            y = 2.0 * np.tanh(X[:, 0])
            w0 = 1.0 - rng.random()
            ind = self._fitted(f"[tanh({{{w0!r}}}x0)]", X, y)
            before = float(np.mean((y - forward(ind, X) @ ind.beta
                                    - ind.intercept) ** 2))
            out = train(ind, X, y, SgdConfig(), rng)
            after = float(np.mean((y - forward(out, X) @ out.beta
                                   - out.intercept) ** 2))
            if after < before:
                wins += 1
        assert wins >= 90

    def test_batches_cover_data_without_replacement(self):
        # batch == N uses every row each step; smaller batches split an epoch
        rng = np.random.default_rng(3)
        X = rng.normal(size=(10, 1))
        y = 3 * X[:, 0]
        ind = self._fitted("[relu({0.5}x0)]", X, y)
        out = train(ind, X, y, SgdConfig(iterations=4, batch_size=5), rng)
        assert out is not ind
