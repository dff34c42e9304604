"""Typed expression trees: function set, nodes, validation, complexity, text form.

An individual is an ordered list of trees, each stored as a postfix (stack
order) sequence of nodes.  Differentiable nodes carry one trainable weight
per argument; the weight multiplies the argument value before the node
function is applied.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

CONTINUOUS = "continuous"
BOOLEAN = "boolean"

# Crossover/mutation never touch these defaults; they only matter for the
# complexity objective.  Heavier weight = considered harder to read.
DEFAULT_COMPLEXITY_WEIGHTS = {
    "add": 1, "sub": 1,
    "mul": 2, "eq": 2, "lt": 2, "le": 2, "gt": 2, "ge": 2,
    "div": 3, "square": 3, "cube": 3,
    "sqrt": 4, "sin": 4, "cos": 4, "tanh": 4, "exp": 4, "log": 4,
    "logit": 4, "gauss": 4, "relu": 4, "pow": 4,
    "and": 4, "or": 4, "not": 4, "xor": 4,
    "terminal": 1,
}

# name -> (out_type, arg_types, differentiable)
FUNCTION_SIGNATURES = {
    "add":    (CONTINUOUS, (CONTINUOUS, CONTINUOUS), True),
    "sub":    (CONTINUOUS, (CONTINUOUS, CONTINUOUS), True),
    "mul":    (CONTINUOUS, (CONTINUOUS, CONTINUOUS), True),
    "div":    (CONTINUOUS, (CONTINUOUS, CONTINUOUS), True),
    "square": (CONTINUOUS, (CONTINUOUS,), True),
    "cube":   (CONTINUOUS, (CONTINUOUS,), True),
    "sqrt":   (CONTINUOUS, (CONTINUOUS,), True),
    "sin":    (CONTINUOUS, (CONTINUOUS,), True),
    "cos":    (CONTINUOUS, (CONTINUOUS,), True),
    "exp":    (CONTINUOUS, (CONTINUOUS,), True),
    "log":    (CONTINUOUS, (CONTINUOUS,), True),
    "pow":    (CONTINUOUS, (CONTINUOUS, CONTINUOUS), True),
    "logit":  (CONTINUOUS, (CONTINUOUS,), True),
    "tanh":   (CONTINUOUS, (CONTINUOUS,), True),
    "gauss":  (CONTINUOUS, (CONTINUOUS,), True),
    "relu":   (CONTINUOUS, (CONTINUOUS,), True),
    "and":    (BOOLEAN, (BOOLEAN, BOOLEAN), False),
    "or":     (BOOLEAN, (BOOLEAN, BOOLEAN), False),
    "not":    (BOOLEAN, (BOOLEAN,), False),
    "xor":    (BOOLEAN, (BOOLEAN, BOOLEAN), False),
    "eq":     (BOOLEAN, (CONTINUOUS, CONTINUOUS), False),
    "lt":     (BOOLEAN, (CONTINUOUS, CONTINUOUS), False),
    "le":     (BOOLEAN, (CONTINUOUS, CONTINUOUS), False),
    "gt":     (BOOLEAN, (CONTINUOUS, CONTINUOUS), False),
    "ge":     (BOOLEAN, (CONTINUOUS, CONTINUOUS), False),
}

_INFIX_SYMBOLS = {
    "add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^",
    "eq": "=", "lt": "<", "le": "<=", "gt": ">", "ge": ">=",
}
_WORD_INFIX = {"and", "or", "xor"}
_CALL_FORM = {"sqrt", "sin", "cos", "exp", "log", "logit", "tanh", "gauss",
              "relu", "not"}


class ExprError(Exception):
    """Structural problem in a tree or individual."""


class ParseError(ExprError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class NodeKind:
    """One operator or terminal: its type signature and complexity weight."""

    name: str
    out_type: str
    arg_types: tuple
    differentiable: bool
    complexity: int
    feature_index: int | None = None  # terminals only

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    @property
    def is_terminal(self) -> bool:
        return not self.arg_types


class FunctionSet:
    """Registry of operator kinds plus one terminal kind per input feature."""

    def __init__(self, n_features: int, complexity_weights: dict | None = None):
        if n_features < 1:
            raise ExprError("function set needs at least one input feature")
        weights = dict(DEFAULT_COMPLEXITY_WEIGHTS)
        if complexity_weights:
            unknown = set(complexity_weights) - set(weights)
            if unknown:
                raise ExprError(f"unknown complexity weight keys: {sorted(unknown)}")
            weights.update(complexity_weights)
        for name, w in weights.items():
            if int(w) != w or w < 1:
                raise ExprError(f"complexity weight for {name!r} must be a positive integer")

        self.n_features = n_features
        self.complexity_weights = weights
        self.functions: dict[str, NodeKind] = {}
        for name, (out_type, arg_types, diff) in FUNCTION_SIGNATURES.items():
            self.functions[name] = NodeKind(name, out_type, arg_types, diff,
                                            int(weights[name]))
        self.terminals = [
            NodeKind(f"x{j}", CONTINUOUS, (), False, int(weights["terminal"]),
                     feature_index=j)
            for j in range(n_features)
        ]
        self.continuous_functions = [k for k in self.functions.values()
                                     if k.out_type == CONTINUOUS]
        self.boolean_functions = [k for k in self.functions.values()
                                  if k.out_type == BOOLEAN]
        # boolean-output kinds split by what they consume
        self.comparisons = [k for k in self.boolean_functions
                            if k.arg_types[0] == CONTINUOUS]
        self.boolean_gates = [k for k in self.boolean_functions
                              if k.arg_types[0] == BOOLEAN]

    def kind(self, name: str) -> NodeKind:
        if name in self.functions:
            return self.functions[name]
        m = re.fullmatch(r"x(\d+)", name)
        if m:
            j = int(m.group(1))
            if j >= self.n_features:
                raise ExprError(f"terminal {name} out of range (have {self.n_features} features)")
            return self.terminals[j]
        raise ExprError(f"unknown operator {name!r}")

    def terminal(self, j: int) -> NodeKind:
        return self.terminals[j]

    def same_signature(self, kind: NodeKind) -> list:
        """Kinds interchangeable with `kind` (same output and argument types)."""
        if kind.is_terminal:
            return [t for t in self.terminals if t.feature_index != kind.feature_index]
        return [k for k in self.functions.values()
                if k.name != kind.name and k.out_type == kind.out_type
                and k.arg_types == kind.arg_types]


@dataclass
class Node:
    """A single tree node; weights has one entry per argument iff differentiable."""

    kind: NodeKind
    weights: list | None = None

    def __post_init__(self):
        if self.kind.differentiable:
            if self.weights is None:
                self.weights = [1.0] * self.kind.arity
            else:
                self.weights = [float(w) for w in self.weights]
            if len(self.weights) != self.kind.arity:
                raise ExprError(f"{self.kind.name} expects {self.kind.arity} weights")
        elif self.weights is not None:
            raise ExprError(f"{self.kind.name} is not differentiable, weights not allowed")

    @property
    def feature_index(self) -> int | None:
        return self.kind.feature_index

    def copy(self) -> "Node":
        return Node(self.kind, None if self.weights is None else list(self.weights))


@dataclass
class Tree:
    """Postfix (stack order) node sequence; index len-1 is the root."""

    nodes: list

    def __len__(self):
        return len(self.nodes)

    def copy(self) -> "Tree":
        return Tree([n.copy() for n in self.nodes])


@dataclass(eq=False)
class Individual:
    """An ordered set of trees plus the fitted linear layer and fitness."""

    trees: list
    beta: np.ndarray | None = None
    intercept: float = 0.0
    fitness: np.ndarray | None = None
    complexity: int | None = None
    rank: int | None = None
    crowd_dist: float | None = None
    # evaluation bookkeeping, never serialized
    train_mse: float | None = None
    val_mse: float | None = None
    case_errors: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.trees)

    def clone(self) -> "Individual":
        return Individual(
            trees=[t.copy() for t in self.trees],
            beta=None if self.beta is None else np.array(self.beta),
            intercept=self.intercept,
            fitness=None if self.fitness is None else np.array(self.fitness),
            complexity=self.complexity,
        )

    def __eq__(self, other):
        """Structural equality: same trees, node kinds and exact weights."""
        if not isinstance(other, Individual):
            return NotImplemented
        return self.trees == other.trees

    def __hash__(self):
        return hash(to_string(self))


# ---------------------------------------------------------------------------
# structure helpers

def tree_children(nodes) -> list:
    """Children positions per node, in argument order.  Raises on malformed trees."""
    stack = []
    children = []
    for k, node in enumerate(nodes):
        arity = node.kind.arity
        if len(stack) < arity:
            raise ExprError(f"not enough operands for {node.kind.name} at node {k}")
        args = stack[len(stack) - arity:] if arity else []
        del stack[len(stack) - arity:]
        children.append(args)
        stack.append(k)
    if len(stack) != 1:
        raise ExprError(f"{len(stack)} values left on stack, expected 1")
    return children


def subtree_slice(nodes, root: int) -> slice:
    """Postfix span of the subtree rooted at `root` (contiguous by construction)."""
    start = root
    pending = nodes[root].kind.arity
    while pending:
        start -= 1
        pending += nodes[start].kind.arity - 1
    return slice(start, root + 1)


def tree_depth(tree: Tree) -> int:
    """Edge depth: a lone terminal has depth 0."""
    stack = []
    for node in tree.nodes:
        arity = node.kind.arity
        if arity == 0:
            stack.append(0)
        else:
            args = stack[len(stack) - arity:]
            del stack[len(stack) - arity:]
            stack.append(1 + max(args))
    return stack[-1]


def node_depths(tree: Tree) -> list:
    """Depth of each node measured from the tree root (root depth 0)."""
    children = tree_children(tree.nodes)
    depths = [0] * len(tree.nodes)
    for k in range(len(tree.nodes) - 1, -1, -1):
        for c in children[k]:
            depths[c] = depths[k] + 1
    return depths


def validate_tree(tree: Tree, n_features: int, max_depth: int) -> list:
    """Return a list of violation messages; empty means the tree is valid."""
    violations = []
    if not tree.nodes:
        return ["tree has no nodes"]
    stack = []
    broken = False
    for k, node in enumerate(tree.nodes):
        kind = node.kind
        arity = kind.arity
        if len(stack) < arity:
            violations.append(f"{kind.name} needs {arity} operands at node {k}")
            broken = True
            break
        if arity:
            args = stack[len(stack) - arity:]
            del stack[len(stack) - arity:]
            for slot, (want, got) in enumerate(zip(kind.arg_types, args)):
                if want != got:
                    violations.append(
                        f"{kind.name} expects {want} args at node {k} (slot {slot} is {got})")
        else:
            if kind.feature_index is None or not 0 <= kind.feature_index < n_features:
                violations.append(f"terminal feature index out of range at node {k}")
        if kind.differentiable:
            if node.weights is None or len(node.weights) != arity:
                violations.append(f"{kind.name} missing edge weights at node {k}")
            elif not all(np.isfinite(w) for w in node.weights):
                violations.append(f"non-finite edge weight at node {k}")
        elif node.weights is not None:
            violations.append(f"{kind.name} must not carry weights at node {k}")
        stack.append(kind.out_type)
    if not broken and len(stack) != 1:
        violations.append(f"{len(stack)} values left on stack, expected 1")
    if not violations:
        d = tree_depth(tree)
        if d > max_depth:
            violations.append(f"depth {d} exceeds limit {max_depth}")
    return violations


def validate_individual(ind: Individual, n_features: int, max_depth: int,
                        max_dim: int) -> list:
    violations = []
    if not 1 <= ind.m <= max_dim:
        violations.append(f"dimensionality {ind.m} outside [1, {max_dim}]")
    for t, tree in enumerate(ind.trees):
        for v in validate_tree(tree, n_features, max_depth):
            violations.append(f"tree {t}: {v}")
    return violations


# ---------------------------------------------------------------------------
# complexity and size

def tree_complexity(tree: Tree) -> int:
    """Operator-weighted recursive size; a leaf scores its own weight."""
    stack = []
    for node in tree.nodes:
        arity = node.kind.arity
        if arity == 0:
            stack.append(node.kind.complexity)
        else:
            args = stack[len(stack) - arity:]
            del stack[len(stack) - arity:]
            stack.append(node.kind.complexity * sum(args))
    return stack[-1]


def individual_complexity(ind: Individual) -> int:
    return sum(tree_complexity(t) for t in ind.trees)


def node_count(ind: Individual) -> int:
    return sum(len(t.nodes) for t in ind.trees)


# ---------------------------------------------------------------------------
# text form:  [tree][tree]...   with {w} weight prefixes on weighted edges

def _fmt_weight(w: float) -> str:
    return "" if w == 1.0 else "{" + repr(float(w)) + "}"


def tree_to_string(tree: Tree, with_weights: bool = True) -> str:
    stack = []
    for node in tree.nodes:
        kind = node.kind
        arity = kind.arity
        args = stack[len(stack) - arity:] if arity else []
        if arity:
            del stack[len(stack) - arity:]
        if with_weights and kind.differentiable:
            args = [_fmt_weight(w) + a for w, a in zip(node.weights, args)]
        if kind.is_terminal:
            stack.append(kind.name)
        elif kind.name == "square":
            stack.append(f"({args[0]}^2)")
        elif kind.name == "cube":
            stack.append(f"({args[0]}^3)")
        elif kind.name in _CALL_FORM:
            stack.append(f"{kind.name}({args[0]})")
        elif kind.name in _WORD_INFIX:
            stack.append(f"({args[0]} {kind.name} {args[1]})")
        else:
            stack.append(f"({args[0]}{_INFIX_SYMBOLS[kind.name]}{args[1]})")
    return stack[-1]


def to_string(ind: Individual, with_weights: bool = True) -> str:
    """Bracketed infix rendering, one bracket group per tree."""
    return "".join(f"[{tree_to_string(t, with_weights)}]" for t in ind.trees)


_TOKEN_RE = re.compile(r"""
    \s*(
      \{[^{}]*\}            # weight
    | [A-Za-z_][A-Za-z0-9_]*  # name
    | \d+\.?\d*             # bare number (square/cube exponents)
    | <=|>=|[][()+\-*/^=<>]
    )""", re.VERBOSE)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ParseError(f"unexpected character {text[pos]!r}", pos)
            break
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, fs: FunctionSet):
        self.text = text
        self.fs = fs
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def next(self):
        if self.i >= len(self.tokens):
            raise ParseError("unexpected end of input", len(self.text))
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, want):
        tok, pos = self.next()
        if tok != want:
            raise ParseError(f"expected {want!r}, found {tok!r}", pos)

    def pos(self):
        return self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)

    def parse_individual(self) -> Individual:
        trees = []
        while self.peek() == "[":
            self.next()
            nodes = []
            self.parse_expr(nodes)
            self.expect("]")
            trees.append(Tree(nodes))
        if self.i < len(self.tokens):
            raise ParseError(f"trailing input {self.peek()!r}", self.pos())
        if not trees:
            raise ParseError("no trees found", 0)
        return Individual(trees=trees)

    def parse_arg(self, nodes):
        """Optional {weight} prefix, then an expression.  Returns (weight, out_type)."""
        weight = None
        if self.peek() is not None and self.peek().startswith("{"):
            tok, pos = self.next()
            try:
                weight = float(tok[1:-1])
            except ValueError:
                raise ParseError(f"bad weight literal {tok!r}", pos)
        out_type = self.parse_expr(nodes)
        return weight, out_type

    def parse_expr(self, nodes) -> str:
        tok, pos = self.next()
        if tok == "(":
            w1, t1 = self.parse_arg(nodes)
            op, op_pos = self.next()
            if op == "^" and self.peek() in ("2", "3"):
                power, _ = self.next()
                kind = self.fs.kind("square" if power == "2" else "cube")
                self.expect(")")
                self._push(nodes, kind, [t1], [w1], op_pos)
                return kind.out_type
            name = _op_symbol_to_name(op)
            if name is None:
                raise ParseError(f"expected an operator, found {op!r}", op_pos)
            w2, t2 = self.parse_arg(nodes)
            self.expect(")")
            kind = self.fs.kind(name)
            self._push(nodes, kind, [t1, t2], [w1, w2], op_pos)
            return kind.out_type
        if re.fullmatch(r"x\d+", tok):
            try:
                kind = self.fs.kind(tok)
            except ExprError as e:
                raise ParseError(str(e), pos)
            nodes.append(Node(kind))
            return kind.out_type
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            try:
                kind = self.fs.kind(tok)
            except ExprError as e:
                raise ParseError(str(e), pos)
            if kind.arity != 1:
                raise ParseError(f"{tok} is not a unary operator", pos)
            self.expect("(")
            w, t = self.parse_arg(nodes)
            self.expect(")")
            self._push(nodes, kind, [t], [w], pos)
            return kind.out_type
        raise ParseError(f"unexpected token {tok!r}", pos)

    def _push(self, nodes, kind, arg_types, weights, pos):
        for slot, (want, got) in enumerate(zip(kind.arg_types, arg_types)):
            if want != got:
                raise ParseError(
                    f"{kind.name} expects {want} argument in slot {slot}, got {got}", pos)
        if kind.differentiable:
            nodes.append(Node(kind, [1.0 if w is None else w for w in weights]))
        else:
            if any(w is not None for w in weights):
                raise ParseError(f"{kind.name} does not take edge weights", pos)
            nodes.append(Node(kind))


def _op_symbol_to_name(sym: str) -> str | None:
    for name, s in _INFIX_SYMBOLS.items():
        if s == sym:
            return name
    if sym in _WORD_INFIX:
        return sym
    return None


def parse(text: str, fs: FunctionSet) -> Individual:
    """Inverse of to_string; unknown operators and type errors raise ParseError."""
    return _Parser(text, fs).parse_individual()
