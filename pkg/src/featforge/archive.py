"""Pareto archive over (training loss, complexity) and final model selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linear
from .evaluator import forward
from .expr import Individual, to_string


@dataclass
class ArchiveEntry:
    individual: Individual
    complexity: int
    train_mse: float


class ParetoArchive:
    """Non-dominated set of evaluated individuals, one entry per complexity.

    Entries stay sorted by complexity ascending, so training loss is strictly
    descending along the archive.
    """

    def __init__(self):
        self.entries: list[ArchiveEntry] = []

    def __len__(self):
        return len(self.entries)

    def update(self, candidates) -> None:
        """Absorb evaluated individuals; keeps the non-dominated staircase."""
        pool = list(self.entries)
        for ind in candidates:
            if ind.fitness is None or ind.complexity is None:
                continue
            mse = ind.train_mse
            if mse is None or not np.isfinite(mse):
                continue
            pool.append(ArchiveEntry(ind.clone(), int(ind.complexity), float(mse)))
        best_at = {}
        for e in pool:
            cur = best_at.get(e.complexity)
            if cur is None or e.train_mse < cur.train_mse:
                best_at[e.complexity] = e
        kept = []
        best_loss = np.inf
        for c in sorted(best_at):
            e = best_at[c]
            if e.train_mse < best_loss:
                kept.append(e)
                best_loss = e.train_mse
        self.entries = kept

    def best_train_mse(self) -> float:
        return min((e.train_mse for e in self.entries), default=np.inf)


def validation_mse(entry: ArchiveEntry, X_val: np.ndarray, y_val: np.ndarray) -> float:
    ind = entry.individual
    phi = forward(ind, X_val)
    if ind.beta is None or not np.all(np.isfinite(phi)):
        return np.inf
    return linear.mse(y_val, phi @ ind.beta + ind.intercept)


def select_final(entries, X_val: np.ndarray, y_val: np.ndarray) -> ArchiveEntry:
    """Entry with the lowest hold-out MSE; ties go to the simpler entry."""
    entries = list(entries)
    if not entries:
        raise ValueError("archive is empty")
    scored = [(validation_mse(e, X_val, y_val), e.complexity, i)
              for i, e in enumerate(entries)]
    _, _, best = min(scored)
    return entries[best]


def export_entries(entries, X_train, y_train, X_val, y_val) -> list:
    """Archive rows for reporting: losses, scores and the expression text."""
    rows = []
    y_train = np.asarray(y_train)
    var_train = float(np.sum((y_train - y_train.mean()) ** 2))
    for e in entries:
        ind = e.individual
        phi_val = forward(ind, X_val)
        preds_val = phi_val @ ind.beta + ind.intercept
        train_r2 = 1.0 - e.train_mse * len(y_train) / var_train if var_train > 0 else 0.0
        rows.append({
            "complexity": int(e.complexity),
            "train_mse": float(e.train_mse),
            "val_mse": linear.mse(y_val, preds_val),
            "train_r2": float(train_r2),
            "val_r2": linear.r2_score(y_val, preds_val),
            "expression": to_string(ind),
            "beta": [float(b) for b in ind.beta],
        })
    return rows
