"""Parent selection and survival: epsilon-lexicase, NSGA2 routines, annealing.

All strategies minimize.  Fitness matrices are (pool x objectives) arrays;
case error matrices are (pool x samples) arrays of per-sample squared error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AnnealSchedule:
    t0: float = 10.0
    decay: float = 0.9

    def __post_init__(self):
        if self.t0 <= 0 or not 0.0 < self.decay < 1.0:
            raise ValueError("need t0 > 0 and decay in (0, 1)")

    def temperature(self, generation: int) -> float:
        return (self.decay ** generation) * self.t0


def case_epsilons(E: np.ndarray) -> np.ndarray:
    """Median absolute deviation of each case's errors across the pool."""
    med = np.median(E, axis=0)
    return np.median(np.abs(E - med), axis=0)


def epsilon_lexicase_select(E: np.ndarray, rng, epsilons: np.ndarray | None = None):
    """Select one pool index by filtering through shuffled cases.

    Each case keeps the candidates within its epsilon (MAD of the starting
    pool's errors on that case) of the best surviving error; ties after the
    last case break uniformly.  Returns (index, trace) where trace lists the
    (case, threshold) filters actually applied, for replay checks.
    """
    pool = np.arange(E.shape[0])
    if epsilons is None:
        epsilons = case_epsilons(E)
    trace = []
    for case in rng.permutation(E.shape[1]):
        errs = E[pool, case]
        threshold = errs.min() + epsilons[case]
        trace.append((int(case), float(threshold)))
        pool = pool[errs <= threshold]
        if len(pool) == 1:
            return int(pool[0]), trace
    return int(pool[rng.integers(len(pool))]), trace


def dominates(fa: np.ndarray, fb: np.ndarray) -> bool:
    """fa dominates fb: no worse everywhere and strictly better somewhere."""
    return bool(np.all(fa <= fb) and np.any(fa < fb))


def fast_nondominated_sort(F: np.ndarray):
    """Pareto fronts of a fitness matrix; returns (ranks, fronts).

    ranks[i] is the peeling depth of individual i; fronts is a list of index
    arrays, fronts[0] being the non-dominated set.
    """
    n = F.shape[0]
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    n_dominators = dom.sum(axis=0)
    ranks = np.full(n, -1, dtype=int)
    fronts = []
    current = np.flatnonzero(n_dominators == 0)
    rank = 0
    remaining = n
    while remaining:
        ranks[current] = rank
        fronts.append(current)
        remaining -= len(current)
        if not remaining:
            break
        n_dominators = n_dominators - dom[current].sum(axis=0)
        n_dominators[ranks >= 0] = -1
        current = np.flatnonzero(n_dominators == 0)
        rank += 1
    return ranks, fronts


def crowding_distance(F_front: np.ndarray) -> np.ndarray:
    """Per-member diversity: sum of normalized neighbor gaps, inf on boundaries."""
    n, k = F_front.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for obj in range(k):
        order = np.argsort(F_front[:, obj], kind="stable")
        vals = F_front[order, obj]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = vals[-1] - vals[0]
        if span > 0:
            dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist


def nsga2_survive(F: np.ndarray, capacity: int):
    """Pick `capacity` survivors by (rank, crowding); returns their indices.

    Whole fronts are admitted in rank order; the straddling front is cut by
    descending crowding distance, ties by index.  Also returns per-individual
    (rank, crowding) for bookkeeping.
    """
    if capacity > F.shape[0]:
        raise ValueError("capacity exceeds pool size")
    ranks, fronts = fast_nondominated_sort(F)
    crowd = np.zeros(F.shape[0])
    survivors = []
    for front in fronts:
        cd = crowding_distance(F[front])
        crowd[front] = cd
        if len(survivors) + len(front) <= capacity:
            survivors.extend(int(i) for i in front)
        else:
            room = capacity - len(survivors)
            order = sorted(range(len(front)), key=lambda i: (-cd[i], front[i]))
            survivors.extend(int(front[i]) for i in order[:room])
        if len(survivors) == capacity:
            break
    return survivors, ranks, crowd


def lex_survive(parents: list, offspring: list, key) -> list:
    """Offspring survive wholesale; the worst one yields to an elite parent.

    If the best individual of the whole pool is already an offspring the
    offspring pass through unchanged.
    """
    best_parent = min(range(len(parents)), key=lambda i: key(parents[i]))
    best_child = min(range(len(offspring)), key=lambda i: key(offspring[i]))
    if key(parents[best_parent]) >= key(offspring[best_child]):
        return list(offspring)
    survivors = list(offspring)
    worst_child = max(range(len(offspring)), key=lambda i: key(offspring[i]))
    survivors[worst_child] = parents[best_parent]
    return survivors


def anneal_accept(f_parent: float, f_offspring: float, t: float, rng) -> bool:
    """Accept the offspring with probability min(1, exp((F_p - F_o)/t))."""
    if t <= 0:
        raise ValueError("temperature must be positive")
    if f_offspring <= f_parent:
        return True
    return rng.random() < np.exp((f_parent - f_offspring) / t)


def shared_tree_count(a, b) -> int:
    """Number of trees of a that structurally match some tree of b (multiset)."""
    from .expr import tree_to_string

    pool = {}
    for t in b.trees:
        key = tree_to_string(t)
        pool[key] = pool.get(key, 0) + 1
    shared = 0
    for t in a.trees:
        key = tree_to_string(t)
        if pool.get(key, 0) > 0:
            pool[key] -= 1
            shared += 1
    return shared
