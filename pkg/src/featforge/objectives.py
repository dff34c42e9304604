"""Fitness objectives: training loss, complexity, and representation entanglement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linear
from .evaluator import forward
from .expr import Individual, individual_complexity

MSE = "mse"
COMPLEXITY = "complexity"
CORR = "corr"
CN = "cn"

# sentinel written to quarantined individuals; dominates nothing
WORST_FITNESS = 1e30

CN_SENTINEL = 1e12

_ALLOWED = [(MSE, COMPLEXITY), (MSE, COMPLEXITY, CORR), (MSE, COMPLEXITY, CN)]


@dataclass(frozen=True)
class ObjectiveSet:
    names: tuple = (MSE, COMPLEXITY)

    def __post_init__(self):
        if tuple(self.names) not in _ALLOWED:
            raise ValueError(
                f"objectives must be one of {_ALLOWED}, got {tuple(self.names)}")

    def __len__(self):
        return len(self.names)


def corr_entanglement(phi: np.ndarray) -> float:
    """Mean squared pairwise Pearson correlation among the columns of phi.

    Zero for a single column; constant columns correlate 0 with everything.
    """
    phi = np.asarray(phi, dtype=np.float64)
    m = phi.shape[1]
    if m < 2:
        return 0.0
    centered = phi - phi.mean(axis=0)
    stds = phi.std(axis=0)
    live = stds > 1e-12
    denom = np.where(live, stds, 1.0)
    z = centered / denom
    corr = (z.T @ z) / phi.shape[0]
    corr[~live, :] = 0.0
    corr[:, ~live] = 0.0
    np.fill_diagonal(corr, 0.0)
    return float(np.sum(corr * corr) / (m * (m - 1)))


def cond_number(phi: np.ndarray) -> float:
    """Ratio of extreme singular values of the column-standardized matrix.

    Rank deficiency (smallest singular value below 1e-12 of the largest)
    returns the 1e12 sentinel.
    """
    phi = np.asarray(phi, dtype=np.float64)
    means = phi.mean(axis=0)
    stds = phi.std(axis=0)
    stds = np.where(stds > 1e-12, stds, 1.0)
    z = (phi - means) / stds
    sv = np.linalg.svd(z, compute_uv=False)
    smax = float(sv[0])
    smin = float(sv[-1])
    if smin < 1e-12 * smax or smax == 0.0:
        return CN_SENTINEL
    return smax / smin


def worst_case(objectives: ObjectiveSet) -> np.ndarray:
    return np.full(len(objectives), WORST_FITNESS)


def evaluate(ind: Individual, X: np.ndarray, y: np.ndarray,
             objectives: ObjectiveSet, phi: np.ndarray | None = None) -> np.ndarray:
    """Fitness vector for a fitted individual, aligned with the objective set."""
    if phi is None:
        phi = forward(ind, X)
    if not np.all(np.isfinite(phi)) or ind.beta is None:
        return worst_case(objectives)
    preds = phi @ ind.beta + ind.intercept
    values = []
    for name in objectives.names:
        if name == MSE:
            values.append(linear.mse(y, preds))
        elif name == COMPLEXITY:
            values.append(float(individual_complexity(ind)))
        elif name == CORR:
            values.append(corr_entanglement(phi))
        elif name == CN:
            values.append(cond_number(phi))
    fitness = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(fitness)):
        return worst_case(objectives)
    return fitness
