import numpy as np
import pytest

from featforge import FunctionSet, Limits, VariationConfig
from featforge.variation import random_individual


@pytest.fixture
def fs5():
    return FunctionSet(5)


@pytest.fixture
def limits():
    return Limits(max_depth=10, max_dim=50)


def make_random_individuals(n, n_features=5, seed=0, max_dim=50):
    """Valid random individuals straight from the generator."""
    fs = FunctionSet(n_features)
    cfg = VariationConfig()
    lim = Limits(max_depth=10, max_dim=max_dim)
    rng = np.random.default_rng(seed)
    return fs, lim, [random_individual(fs, rng, cfg, lim) for _ in range(n)]


def synthetic_dataset(kind, n, seed, noise=0.05):
    """Small regression problems used across engine tests."""
    rng = np.random.default_rng(seed)
    if kind == "linear":
        X = rng.normal(size=(n, 3))
        y = 3.0 * X[:, 0] + 2.0 * X[:, 1] - X[:, 2]
    elif kind == "tanh":
        X = rng.normal(size=(n, 3))
        y = 2.0 * np.tanh(X[:, 0]) + X[:, 1]
    elif kind == "square":
        X = rng.normal(size=(n, 3))
        y = X[:, 0] ** 2 + 0.5 * X[:, 2]
    else:
        raise ValueError(kind)
    return X, y + rng.normal(0.0, noise, n)
