"""Forward evaluation of representations and SGD training of edge weights.

All node math is protected so that evaluation is total over real inputs:
division is a*b/(b^2+eps), log works on |x| with log(0) substituted by 0,
sqrt works on |x|, and binary power is |a|^b.  Continuous outputs are
clamped to +-1e100 so no chain of operators can overflow to inf.

Backpropagation runs through the weighted edges of differentiable nodes
only; boolean subtrees (gates and comparisons) block the gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Individual, Tree, tree_children

VALUE_CLAMP = 1e100
GRAD_CLIP = 1e6
DIV_EPS = 1e-9
EXP_CLIP = 100.0


class EvaluationError(Exception):
    pass


def _clamp(v):
    return np.minimum(np.maximum(v, -VALUE_CLAMP), VALUE_CLAMP)


def _plog(z):
    # log(|z|) with the zero case mapped to 0
    return np.log(np.where(z == 0.0, 1.0, np.abs(z)))


def _recip(z):
    # 1/z with the zero case mapped to 0, magnitude capped at the gradient
    # clip so products with large factors can never reach inf or nan
    out = np.zeros_like(z)
    np.divide(1.0, z, out=out, where=z != 0.0)
    return np.minimum(np.maximum(out, -GRAD_CLIP), GRAD_CLIP)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(np.clip(-z, -EXP_CLIP, EXP_CLIP)))


def _bool(z):
    return z > 0.5


# forward(z...) -> value;  partials(z..., out) -> tuple of d(out)/d(z_i)
_KERNELS = {
    "add": (
        lambda a, b: _clamp(a + b),
        lambda a, b, out: (np.ones_like(a), np.ones_like(b)),
    ),
    "sub": (
        lambda a, b: _clamp(a - b),
        lambda a, b, out: (np.ones_like(a), -np.ones_like(b)),
    ),
    "mul": (
        lambda a, b: _clamp(a * b),
        lambda a, b, out: (b, a),
    ),
    "div": (
        lambda a, b: _clamp(a * b / (b * b + DIV_EPS)),
        lambda a, b, out: (
            b / (b * b + DIV_EPS),
            a * (DIV_EPS - b * b) / (b * b + DIV_EPS) ** 2,
        ),
    ),
    "square": (
        lambda a: _clamp(a * a),
        lambda a, out: (2.0 * a,),
    ),
    "cube": (
        lambda a: _clamp(a * a * a),
        lambda a, out: (3.0 * a * a,),
    ),
    "sqrt": (
        lambda a: np.sqrt(np.abs(a)),
        lambda a, out: (np.sign(a) * 0.5 * _recip(out),),
    ),
    "sin": (
        lambda a: np.sin(a),
        lambda a, out: (np.cos(a),),
    ),
    "cos": (
        lambda a: np.cos(a),
        lambda a, out: (-np.sin(a),),
    ),
    "exp": (
        lambda a: np.exp(np.clip(a, -EXP_CLIP, EXP_CLIP)),
        lambda a, out: (out,),
    ),
    "log": (
        lambda a: _plog(a),
        lambda a, out: (_recip(a),),
    ),
    "pow": (
        lambda a, b: np.exp(np.clip(b * _plog(a), -EXP_CLIP, EXP_CLIP)),
        lambda a, b, out: (out * b * _recip(a), out * _plog(a)),
    ),
    "logit": (
        lambda a: _sigmoid(a),
        lambda a, out: (out * (1.0 - out),),
    ),
    "tanh": (
        lambda a: np.tanh(a),
        lambda a, out: (1.0 - out * out,),
    ),
    "gauss": (
        lambda a: np.exp(-a * a),
        lambda a, out: (-2.0 * a * out,),
    ),
    "relu": (
        lambda a: np.maximum(a, 0.0),
        lambda a, out: ((a > 0.0).astype(np.float64),),
    ),
    # boolean values travel as float {0.0, 1.0}
    "and": (lambda a, b: (_bool(a) & _bool(b)).astype(np.float64), None),
    "or":  (lambda a, b: (_bool(a) | _bool(b)).astype(np.float64), None),
    "not": (lambda a: (~_bool(a)).astype(np.float64), None),
    "xor": (lambda a, b: (_bool(a) ^ _bool(b)).astype(np.float64), None),
    "eq":  (lambda a, b: (a == b).astype(np.float64), None),
    "lt":  (lambda a, b: (a < b).astype(np.float64), None),
    "le":  (lambda a, b: (a <= b).astype(np.float64), None),
    "gt":  (lambda a, b: (a > b).astype(np.float64), None),
    "ge":  (lambda a, b: (a >= b).astype(np.float64), None),
}


@dataclass
class SgdConfig:
    learning_rate: float = 0.1
    iterations: int = 10
    batch_size: int = 1000

    def __post_init__(self):
        if self.learning_rate <= 0 or self.iterations < 0 or self.batch_size < 1:
            raise ValueError("SGD settings must be positive")


class _TreeCache:
    """Per-node outputs and weighted argument values from one forward pass."""

    __slots__ = ("children", "outs", "zs")

    def __init__(self, children, outs, zs):
        self.children = children
        self.outs = outs
        self.zs = zs


def tree_forward(tree: Tree, X: np.ndarray, need_cache: bool = False,
                 children: list | None = None):
    """Evaluate one tree over all rows of X.  Returns (output, cache or None)."""
    n_cols = X.shape[1]
    if children is None:
        children = tree_children(tree.nodes)
    outs = [None] * len(tree.nodes)
    zs = [None] * len(tree.nodes) if need_cache else None
    with np.errstate(all="ignore"):
        for k, node in enumerate(tree.nodes):
            kind = node.kind
            if kind.is_terminal:
                j = kind.feature_index
                if j >= n_cols:
                    raise EvaluationError(f"terminal x{j} out of range for {n_cols} features")
                outs[k] = X[:, j]
                continue
            args = [outs[c] for c in children[k]]
            if kind.differentiable:
                args = [w * a for w, a in zip(node.weights, args)]
                if need_cache:
                    zs[k] = args
            outs[k] = _KERNELS[kind.name][0](*args)
    cache = _TreeCache(children, outs, zs) if need_cache else None
    return outs[-1], cache


def tree_backward(tree: Tree, cache: _TreeCache, seed: np.ndarray,
                  input_grads: np.ndarray | None = None):
    """Backpropagate `seed` (d loss / d tree output, per sample) to the weights.

    Returns a list aligned with tree.nodes: per differentiable node a list of
    summed weight gradients, None elsewhere.  If input_grads (N x d) is given,
    d loss / d x_j accumulates into it.  Non-differentiable nodes stop the flow.
    """
    n = len(tree.nodes)
    adj = [None] * n
    adj[n - 1] = seed
    grads = [None] * n
    with np.errstate(all="ignore"):
        for k in range(n - 1, -1, -1):
            node = tree.nodes[k]
            a = adj[k]
            if a is None:
                continue
            kind = node.kind
            if kind.is_terminal:
                if input_grads is not None:
                    input_grads[:, kind.feature_index] += a
                continue
            if not kind.differentiable:
                continue
            zs = cache.zs[k]
            partials = _KERNELS[kind.name][1](*zs, cache.outs[k])
            grads[k] = []
            for slot, c in enumerate(cache.children[k]):
                p = np.minimum(np.maximum(partials[slot], -GRAD_CLIP), GRAD_CLIP)
                g = a * p
                gw = float(np.sum(g * cache.outs[c]))
                if gw != gw:  # nan guard, costs nothing
                    gw = 0.0
                grads[k].append(gw)
                down = g * node.weights[slot]
                adj[c] = down if adj[c] is None else adj[c] + down
    return grads


def forward(ind: Individual, X: np.ndarray) -> np.ndarray:
    """Representation matrix: column j is tree j evaluated on every row of X."""
    phi = np.empty((X.shape[0], ind.m), dtype=np.float64)
    for j, tree in enumerate(ind.trees):
        phi[:, j], _ = tree_forward(tree, X)
    return phi


def has_trainable_weights(ind: Individual) -> bool:
    return any(node.kind.differentiable for tree in ind.trees for node in tree.nodes)


def _loss_and_gradients(ind: Individual, X_batch, y_batch, beta, intercept,
                        structure):
    """Batch MSE plus clipped weight gradients, aligned with the trees."""
    B = len(y_batch)
    preds = np.full(B, intercept)
    caches = []
    for j, tree in enumerate(ind.trees):
        out, cache = tree_forward(tree, X_batch, need_cache=True,
                                  children=structure[j])
        caches.append(cache)
        preds += beta[j] * out
    resid = y_batch - preds
    loss = float(np.mean(resid * resid))
    all_grads = []
    for j, tree in enumerate(ind.trees):
        if beta[j] == 0.0 or not any(n.kind.differentiable for n in tree.nodes):
            all_grads.append(None)
            continue
        seed = (-2.0 / B) * beta[j] * resid
        grads = tree_backward(tree, caches[j], seed)
        for g in grads:
            if g is None:
                continue
            for slot, gw in enumerate(g):
                g[slot] = min(max(gw, -GRAD_CLIP), GRAD_CLIP)
        all_grads.append(grads)
    return loss, all_grads


def _apply_gradients(ind: Individual, all_grads, lr: float):
    for tree, grads in zip(ind.trees, all_grads):
        if grads is None:
            continue
        for node, g in zip(tree.nodes, grads):
            if g is None:
                continue
            for slot, gw in enumerate(g):
                node.weights[slot] = float(node.weights[slot] - lr * gw)


def sgd_step(ind: Individual, X_batch: np.ndarray, y_batch: np.ndarray,
             beta: np.ndarray, intercept: float, lr: float,
             structure: list | None = None) -> float:
    """One gradient step on the batch MSE, beta held fixed.

    Mutates ind's weights in place (callers operate on private clones).
    Returns the batch MSE before the step.  `structure` optionally caches
    tree_children per tree across repeated steps.
    """
    if structure is None:
        structure = [tree_children(t.nodes) for t in ind.trees]
    loss, grads = _loss_and_gradients(ind, X_batch, y_batch, beta, intercept,
                                      structure)
    _apply_gradients(ind, grads, lr)
    return loss


def _snapshot_weights(ind):
    return [[None if n.weights is None else list(n.weights) for n in t.nodes]
            for t in ind.trees]


def _restore_weights(ind, snap):
    for tree, tree_snap in zip(ind.trees, snap):
        for node, w in zip(tree.nodes, tree_snap):
            if w is not None:
                node.weights = list(w)


def _batch_mse(ind, X, y, beta, intercept, structure=None):
    if structure is None:
        structure = [tree_children(t.nodes) for t in ind.trees]
    preds = np.full(len(y), intercept)
    for j, tree in enumerate(ind.trees):
        out, _ = tree_forward(tree, X, children=structure[j])
        preds += beta[j] * out
    resid = y - preds
    return float(np.mean(resid * resid))


def train(ind: Individual, X: np.ndarray, y: np.ndarray, cfg: SgdConfig,
          rng: np.random.Generator) -> Individual:
    """Run cfg.iterations SGD steps on a clone of ind; tree structure untouched.

    Batches are drawn without replacement within an epoch.  The learning rate
    starts at cfg.learning_rate and halves whenever a step raises the batch
    loss.
    """
    out = ind.clone()
    out.beta = None if ind.beta is None else np.array(ind.beta)
    out.intercept = ind.intercept
    if cfg.iterations == 0 or not has_trainable_weights(out) or out.beta is None:
        return out
    if not np.any(out.beta):
        return out
    N = X.shape[0]
    batch = min(cfg.batch_size, N)
    lr = cfg.learning_rate
    order = rng.permutation(N)
    cursor = 0
    structure = [tree_children(t.nodes) for t in out.trees]
    for _ in range(cfg.iterations):
        if cursor + batch > N:
            order = rng.permutation(N)
            cursor = 0
        idx = order[cursor:cursor + batch]
        cursor += batch
        Xb, yb = X[idx], y[idx]
        before = _snapshot_weights(out)
        loss_before, grads = _loss_and_gradients(out, Xb, yb, out.beta,
                                                 out.intercept, structure)
        # backtracking guard: halve the rate until the step stops raising
        # the batch loss (the gradient itself does not change), give up
        # after a few tries so a pathological step cannot eat the budget
        for _attempt in range(5):
            _apply_gradients(out, grads, lr)
            if _batch_mse(out, Xb, yb, out.beta, out.intercept,
                          structure) <= loss_before:
                break
            _restore_weights(out, before)
            lr *= 0.5
    return out
