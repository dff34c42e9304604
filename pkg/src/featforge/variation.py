"""Variation operators and the random tree generator.

Six operators act on individuals: point, insert and delete mutation work
inside one tree, insert/delete dimension add or drop a whole tree, and the
two crossovers transplant a subtree or a whole tree from a second parent.
The tree an operator touches is drawn from the coefficient feedback
distribution; within a tree, nodes are drawn uniformly.

Every operator returns (child, changed).  When limits would be violated or
no compatible replacement exists the operator is a no-op: the child is a
plain clone and changed is False, so the offspring count stays exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import (BOOLEAN, CONTINUOUS, FunctionSet, Individual, Node, Tree,
                   subtree_slice, tree_children, tree_depth)
from .linear import feedback_probs

MUTATION_FAMILIES = ("point", "insert", "delete", "dimension")
CROSSOVER_FAMILIES = ("subtree_crossover", "dimension_crossover")

# chance that an internal grow step picks a function instead of a terminal
_GROW_FUNCTION_RATE = 0.5


@dataclass
class Limits:
    max_depth: int = 10
    max_dim: int = 50


@dataclass
class VariationConfig:
    # defaults picked from the tuned grids {0.25, 0.5, 0.75}: mutation-heavy
    # variation with strong coefficient feedback keeps selected models small
    crossover_ratio: float = 0.25
    feedback: float = 0.75
    mutation_weights: tuple = (0.25, 0.25, 0.25, 0.25)
    crossover_weights: tuple = (0.5, 0.5)
    boolean_root_rate: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.crossover_ratio <= 1.0:
            raise ValueError("crossover_ratio must be in [0, 1]")
        if not 0.0 <= self.feedback <= 1.0:
            raise ValueError("feedback must be in [0, 1]")
        for name, probs, want in (("mutation_weights", self.mutation_weights, 4),
                                  ("crossover_weights", self.crossover_weights, 2)):
            if len(probs) != want or abs(sum(probs) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be {want} probabilities summing to 1")


# ---------------------------------------------------------------------------
# random generation (grow method)

def _fresh_weights(kind, rng):
    # uniform in (0, 1]: positive init keeps relu/log paths live
    return [1.0 - rng.random() for _ in range(kind.arity)] if kind.differentiable else None


def _random_terminal(fs: FunctionSet, rng, probs=None) -> Node:
    if probs is None:
        j = int(rng.integers(fs.n_features))
    else:
        j = int(rng.choice(fs.n_features, p=probs))
    return Node(fs.terminal(j))


def _grow(fs: FunctionSet, rng, out_type: str, budget: int, probs, nodes: list):
    if out_type == CONTINUOUS:
        if budget == 0 or rng.random() >= _GROW_FUNCTION_RATE:
            nodes.append(_random_terminal(fs, rng, probs))
            return
        kind = fs.continuous_functions[rng.integers(len(fs.continuous_functions))]
    else:
        # no boolean terminals exist: gates need budget for a comparison below
        pool = fs.comparisons + (fs.boolean_gates if budget >= 2 else [])
        kind = pool[rng.integers(len(pool))]
    for arg_type in kind.arg_types:
        _grow(fs, rng, arg_type, budget - 1, probs, nodes)
    nodes.append(Node(kind, _fresh_weights(kind, rng)))


def random_tree(fs: FunctionSet, rng, target_depth: int,
                out_type: str = CONTINUOUS, terminal_probs=None) -> Tree:
    """Grow a tree of depth in [1, target_depth] rooted at a function node."""
    if target_depth < 1:
        raise ValueError("target_depth must be at least 1")
    if out_type == CONTINUOUS:
        kind = fs.continuous_functions[rng.integers(len(fs.continuous_functions))]
    else:
        pool = fs.comparisons + (fs.boolean_gates if target_depth >= 2 else [])
        kind = pool[rng.integers(len(pool))]
    nodes = []
    for arg_type in kind.arg_types:
        _grow(fs, rng, arg_type, target_depth - 1, terminal_probs, nodes)
    nodes.append(Node(kind, _fresh_weights(kind, rng)))
    return Tree(nodes)


def random_individual(fs: FunctionSet, rng, cfg: VariationConfig, limits: Limits,
                      m: int | None = None, terminal_probs=None) -> Individual:
    """A fresh individual with m grown trees (m uniform in [1, min(d, max_dim)])."""
    if m is None:
        m = int(rng.integers(1, min(fs.n_features, limits.max_dim) + 1))
    trees = []
    for _ in range(m):
        depth = int(rng.integers(1, min(3, limits.max_depth) + 1))
        out_type = BOOLEAN if rng.random() < cfg.boolean_root_rate else CONTINUOUS
        trees.append(random_tree(fs, rng, depth, out_type, terminal_probs))
    return Individual(trees=trees)


# ---------------------------------------------------------------------------
# operators

def choose_tree(ind: Individual, f: float, rng) -> int:
    """Pick a tree index, biased toward small |beta| by the feedback blend."""
    if ind.m == 1:
        return 0
    if ind.beta is None or len(ind.beta) != ind.m:
        return int(rng.integers(ind.m))
    return int(rng.choice(ind.m, p=feedback_probs(ind.beta, f)))


def point_mutation(ind: Individual, fs: FunctionSet, f: float, rng):
    """Swap one node for another kind with the same signature."""
    child = ind.clone()
    t = choose_tree(ind, f, rng)
    tree = child.trees[t]
    k = int(rng.integers(len(tree.nodes)))
    pool = fs.same_signature(tree.nodes[k].kind)
    if not pool:
        return child, False
    kind = pool[rng.integers(len(pool))]
    tree.nodes[k] = Node(kind, _fresh_weights(kind, rng))
    return child, True


def insert_mutation(ind: Individual, fs: FunctionSet, f: float, rng,
                    limits: Limits):
    """Wrap one subtree in a new depth-1 function of the same output type."""
    child = ind.clone()
    t = choose_tree(ind, f, rng)
    tree = child.trees[t]
    k = int(rng.integers(len(tree.nodes)))
    span = subtree_slice(tree.nodes, k)
    sub = tree.nodes[span]
    out_type = tree.nodes[k].kind.out_type
    new_nodes = []
    if out_type == CONTINUOUS:
        kind = fs.continuous_functions[rng.integers(len(fs.continuous_functions))]
        keep_slot = int(rng.integers(kind.arity))
        for slot in range(kind.arity):
            if slot == keep_slot:
                new_nodes.extend(sub)
            else:
                new_nodes.append(_random_terminal(fs, rng))
    else:
        kind = fs.boolean_gates[rng.integers(len(fs.boolean_gates))]
        keep_slot = int(rng.integers(kind.arity))
        for slot in range(kind.arity):
            if slot == keep_slot:
                new_nodes.extend(sub)
            else:
                # smallest boolean filler: a comparison over two terminals
                cmp_kind = fs.comparisons[rng.integers(len(fs.comparisons))]
                new_nodes.append(_random_terminal(fs, rng))
                new_nodes.append(_random_terminal(fs, rng))
                new_nodes.append(Node(cmp_kind))
    new_nodes.append(Node(kind, _fresh_weights(kind, rng)))
    candidate = Tree(tree.nodes[:span.start] + new_nodes + tree.nodes[span.stop:])
    if tree_depth(candidate) > limits.max_depth:
        return ind.clone(), False
    child.trees[t] = candidate
    return child, True


def delete_mutation(ind: Individual, fs: FunctionSet, f: float, rng):
    """Drop a whole tree or collapse a subtree to a terminal, 50/50.

    The drop branch needs m >= 2 and otherwise falls through to subtree
    collapse, so the last feature can never disappear.  Only subtrees in
    continuous slots (or the root) may collapse, keeping gate arguments
    boolean.
    """
    child = ind.clone()
    if rng.random() < 0.5 and child.m >= 2:
        t = choose_tree(ind, f, rng)
        del child.trees[t]
        return child, True
    t = choose_tree(ind, f, rng)
    tree = child.trees[t]
    children = tree_children(tree.nodes)
    eligible = [len(tree.nodes) - 1]
    for k, node in enumerate(tree.nodes):
        for c, want in zip(children[k], node.kind.arg_types):
            if want == CONTINUOUS:
                eligible.append(c)
    k = eligible[rng.integers(len(eligible))]
    span = subtree_slice(tree.nodes, k)
    child.trees[t] = Tree(tree.nodes[:span.start] + [_random_terminal(fs, rng)]
                          + tree.nodes[span.stop:])
    return child, True


def insert_dimension(ind: Individual, fs: FunctionSet, cfg: VariationConfig,
                     rng, limits: Limits):
    """Append one freshly grown tree; no-op at max dimensionality."""
    if ind.m >= limits.max_dim:
        return ind.clone(), False
    child = ind.clone()
    depth = int(rng.integers(1, min(3, limits.max_depth) + 1))
    out_type = BOOLEAN if rng.random() < cfg.boolean_root_rate else CONTINUOUS
    child.trees.append(random_tree(fs, rng, depth, out_type))
    return child, True


def delete_dimension(ind: Individual, f: float, rng):
    """Remove the feedback-chosen tree; no-op when only one tree remains."""
    if ind.m <= 1:
        return ind.clone(), False
    child = ind.clone()
    t = choose_tree(ind, f, rng)
    del child.trees[t]
    return child, True


def subtree_crossover(a: Individual, b: Individual, fs: FunctionSet, rng,
                      limits: Limits):
    """Replace one type-matched subtree of a with a subtree from b."""
    sites = [(t, k) for t, tree in enumerate(a.trees)
             for k in range(len(tree.nodes))]
    donors = [(t, k) for t, tree in enumerate(b.trees)
              for k in range(len(tree.nodes))]
    for _ in range(3):
        t, k = sites[rng.integers(len(sites))]
        out_type = a.trees[t].nodes[k].kind.out_type
        compatible = [(dt, dk) for dt, dk in donors
                      if b.trees[dt].nodes[dk].kind.out_type == out_type]
        if not compatible:
            continue
        dt, dk = compatible[rng.integers(len(compatible))]
        graft = [n.copy() for n in b.trees[dt].nodes[subtree_slice(b.trees[dt].nodes, dk)]]
        span = subtree_slice(a.trees[t].nodes, k)
        candidate = Tree([n.copy() for n in a.trees[t].nodes[:span.start]] + graft
                         + [n.copy() for n in a.trees[t].nodes[span.stop:]])
        if tree_depth(candidate) <= limits.max_depth:
            child = a.clone()
            child.trees[t] = candidate
            return child, True
    return a.clone(), False


def dimension_crossover(a: Individual, b: Individual, f: float, rng):
    """Replace the feedback-chosen tree of a with a uniformly chosen tree of b."""
    child = a.clone()
    t = choose_tree(a, f, rng)
    child.trees[t] = b.trees[rng.integers(b.m)].copy()
    return child, True


def _reset_evaluation(ind: Individual) -> Individual:
    ind.beta = None
    ind.intercept = 0.0
    ind.fitness = None
    ind.complexity = None
    ind.rank = None
    ind.crowd_dist = None
    return ind


def make_offspring(parents: list, count: int, fs: FunctionSet,
                   cfg: VariationConfig, limits: Limits, entropy: tuple):
    """Produce exactly `count` valid children from the selected parents.

    Child i gets its own RNG stream derived from (entropy..., i), so the
    offspring sequence is reproducible and independent of scheduling.
    Returns (children, provenance) where provenance[i] holds the operator
    name and the parent indices used.
    """
    children = []
    provenance = []
    for i in range(count):
        rng = np.random.default_rng(tuple(entropy) + (i,))
        ia = i % len(parents)
        use_crossover = rng.random() < cfg.crossover_ratio
        ib = int(rng.integers(len(parents))) if use_crossover else None
        pa = parents[ia]
        if use_crossover:
            name = CROSSOVER_FAMILIES[int(rng.choice(2, p=cfg.crossover_weights))]
            if name == "subtree_crossover":
                child, changed = subtree_crossover(pa, parents[ib], fs, rng, limits)
            else:
                child, changed = dimension_crossover(pa, parents[ib], cfg.feedback, rng)
        else:
            name = MUTATION_FAMILIES[int(rng.choice(4, p=cfg.mutation_weights))]
            if name == "point":
                child, changed = point_mutation(pa, fs, cfg.feedback, rng)
            elif name == "insert":
                child, changed = insert_mutation(pa, fs, cfg.feedback, rng, limits)
            elif name == "delete":
                child, changed = delete_mutation(pa, fs, cfg.feedback, rng)
            else:
                if rng.random() < 0.5:
                    name = "insert_dimension"
                    child, changed = insert_dimension(pa, fs, cfg, rng, limits)
                else:
                    name = "delete_dimension"
                    child, changed = delete_dimension(pa, cfg.feedback, rng)
        children.append(_reset_evaluation(child))
        provenance.append({"op": name, "parents": (ia, ib), "changed": changed})
    return children, provenance
