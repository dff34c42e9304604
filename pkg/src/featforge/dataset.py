"""CSV ingestion into numeric datasets."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

MIN_ROWS = 10


class DataError(Exception):
    pass


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list
    target_name: str
    dropped_rows: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def from_arrays(X, y, feature_names=None, target_name="y") -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("X must be 2-dimensional")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DataError(f"y length {y.shape} does not match {X.shape[0]} rows of X")
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(X.shape[1])]
    if len(feature_names) != X.shape[1]:
        raise DataError("feature_names length does not match X columns")
    return Dataset(X, y, list(feature_names), target_name)


def load_csv(path, target_column: str) -> Dataset:
    """Read a headered numeric CSV; rows with empty cells are dropped and reported."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        if target_column not in header:
            raise DataError(
                f"{path}: target column {target_column!r} not found; "
                f"available columns: {header}")
        target_idx = header.index(target_column)
        feature_names = [h for i, h in enumerate(header) if i != target_idx]
        if not feature_names:
            raise DataError(f"{path}: no feature columns besides the target")
        rows = []
        dropped = []
        for r, cells in enumerate(reader, start=1):
            if not cells or all(c.strip() == "" for c in cells):
                continue
            if len(cells) != len(header) or any(c.strip() == "" for c in cells):
                dropped.append(r)
                continue
            parsed = []
            for i, cell in enumerate(cells):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell {cell.strip()!r} at row {r}, "
                        f"column {header[i]!r}")
            rows.append(parsed)
    if dropped:
        log.warning("%s: dropped %d row(s) with missing cells: %s",
                    path, len(dropped), dropped[:20])
    if len(rows) < MIN_ROWS:
        raise DataError(f"{path}: only {len(rows)} usable rows, need at least {MIN_ROWS}")
    data = np.array(rows, dtype=np.float64)
    y = data[:, target_idx]
    X = np.delete(data, target_idx, axis=1)
    return Dataset(X, y, feature_names, target_column, dropped)
