"""Standardization, ridge output layer, scoring, and coefficient feedback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FitError(Exception):
    """Raised when the linear solve cannot produce finite coefficients."""


@dataclass
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray  # mask of columns with zero variance (std forced to 1)


@dataclass
class LinearModel:
    beta: np.ndarray
    intercept: float
    ridge_lambda: float


def standardize_fit(X: np.ndarray) -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise ValueError("cannot standardize an empty matrix")
    if X.shape[0] < 2:
        raise ValueError("standardization needs at least 2 rows")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    constant = stds < 1e-12
    stds = np.where(constant, 1.0, stds)
    return Standardizer(means, stds, constant)


def standardize_apply(s: Standardizer, X: np.ndarray) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - s.means) / s.stds


def ridge_fit(phi: np.ndarray, y: np.ndarray, lam: float) -> LinearModel:
    """Closed-form ridge on centered phi and y; intercept is unpenalized."""
    phi = np.asarray(phi, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(phi)):
        raise FitError("non-finite values in the representation matrix")
    col_means = phi.mean(axis=0)
    y_mean = float(y.mean())
    pc = phi - col_means
    yc = y - y_mean
    gram = pc.T @ pc + lam * np.eye(phi.shape[1])
    rhs = pc.T @ yc
    try:
        beta = np.linalg.solve(gram, rhs)
        if not np.all(np.isfinite(beta)):
            raise np.linalg.LinAlgError("non-finite solution")
    except np.linalg.LinAlgError:
        beta = np.linalg.pinv(gram) @ rhs
    if not np.all(np.isfinite(beta)):
        raise FitError("ridge solve produced non-finite coefficients")
    intercept = y_mean - float(col_means @ beta)
    return LinearModel(beta, intercept, lam)


def predict(model: LinearModel, phi: np.ndarray) -> np.ndarray:
    return phi @ model.beta + model.intercept


def mse(y: np.ndarray, y_hat: np.ndarray) -> float:
    resid = np.asarray(y) - np.asarray(y_hat)
    return float(np.mean(resid * resid))


def r2_score(y: np.ndarray, y_hat: np.ndarray) -> float:
    """1 - SSE/SST; returns 0.0 when y is constant (R^2 undefined)."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return 0.0
    sse = float(np.sum((y - y_hat) ** 2))
    return 1.0 - sse / sst


def feedback_probs(beta: np.ndarray, f: float) -> np.ndarray:
    """Per-tree variation probabilities from the linear coefficients.

    Normalized |beta| feeds a softmax of (1 - beta_norm), so trees the linear
    model relies on least are varied most; f blends that with uniform.
    """
    beta = np.asarray(beta, dtype=np.float64)
    m = beta.shape[0]
    total = np.sum(np.abs(beta))
    if total > 0.0:
        norm = np.abs(beta) / total
    else:
        norm = np.full(m, 1.0 / m)
    s = np.exp(1.0 - norm)
    s /= s.sum()
    return f * s + (1.0 - f) / m
