"""Expressive Boolean formulas: node types, evaluation, and scoring.

A formula is a rooted tree of literals and operators.  Operators are
``And``/``Or`` plus the parameterized ``AtLeast``/``AtMost``/``Choose``,
any of which may be negated.  Complexity is the total node count and is
the interpretability measure optimized against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .bitvec import BitMatrix, BitVector, mask_for

AND = "And"
OR = "Or"
ATLEAST = "AtLeast"
ATMOST = "AtMost"
CHOOSE = "Choose"

OPERATOR_KINDS = (AND, OR, ATLEAST, ATMOST, CHOOSE)
PARAMETERIZED = (ATLEAST, ATMOST, CHOOSE)

BALANCED_ACCURACY = "balanced-accuracy"
ACCURACY = "accuracy"


class FormulaError(ValueError):
    pass


class FeatureIndexError(FormulaError):
    def __init__(self, index: int, num_features: int):
        super().__init__(
            f"feature index {index} out of range for {num_features} columns")
        self.index = index


@dataclass(frozen=True)
class Literal:
    feature: int
    negated: bool = False

    def sort_key(self):
        return (0, self.feature, self.negated, "")

    def __repr__(self):
        return f"Literal({'~' if self.negated else ''}f{self.feature})"


@dataclass(frozen=True, eq=False)
class Op:
    kind: str
    k: Optional[int]
    negated: bool
    children: tuple

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise FormulaError(f"unknown operator kind {self.kind!r}")
        if len(self.children) < 2:
            raise FormulaError(
                f"{self.kind} needs at least 2 children, got {len(self.children)}")
        if self.kind in PARAMETERIZED:
            if self.k is None or not 0 <= self.k <= len(self.children):
                raise FormulaError(
                    f"{self.kind} parameter {self.k} outside 0..{len(self.children)}")
        elif self.k is not None:
            raise FormulaError(f"{self.kind} takes no parameter")
        seen = set()
        for c in self.children:
            if isinstance(c, Literal):
                if c.feature in seen:
                    raise FormulaError(
                        f"duplicate feature f{c.feature} under one operator")
                seen.add(c.feature)

    def sort_key(self):
        from .parsing import to_text
        return (1, -1, False, to_text(self))

    def sorted_children(self) -> tuple:
        return tuple(sorted(self.children, key=lambda c: c.sort_key()))

    def __eq__(self, other):
        # Child order is irrelevant: all five operators are symmetric.
        if not isinstance(other, Op):
            return NotImplemented
        return (self.kind == other.kind and self.k == other.k
                and self.negated == other.negated
                and self.sorted_children() == other.sorted_children())

    def __hash__(self):
        return hash((self.kind, self.k, self.negated, self.sorted_children()))

    def __repr__(self):
        from .parsing import to_text
        return f"Op({to_text(self)})"


@dataclass(frozen=True)
class Trivial:
    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise FormulaError("trivial rule must be 0 or 1")

    def sort_key(self):
        return (2, self.value, False, "")


Node = Union[Literal, Op, Trivial]
Formula = Node


def complexity(node: Node) -> int:
    """Total number of literal and operator nodes, repetitions counted."""
    if isinstance(node, Op):
        return 1 + sum(complexity(c) for c in node.children)
    return 1


def depth(node: Node) -> int:
    """Longest root-to-leaf path, in edges."""
    if isinstance(node, Op):
        return 1 + max(depth(c) for c in node.children)
    return 0


def negate(node: Node) -> Node:
    if isinstance(node, Literal):
        return Literal(node.feature, not node.negated)
    if isinstance(node, Op):
        return Op(node.kind, node.k, not node.negated, node.children)
    return Trivial(1 - node.value)


def iter_nodes(node: Node, path: tuple = ()) -> Iterator[tuple[tuple, Node]]:
    """Yield (path, node) for every node, root first.  Paths are child-index tuples."""
    yield path, node
    if isinstance(node, Op):
        for i, c in enumerate(node.children):
            yield from iter_nodes(c, path + (i,))


def node_at(node: Node, path: tuple) -> Node:
    for i in path:
        node = node.children[i]
    return node


def replace_at(node: Node, path: tuple, new: Node) -> Node:
    if not path:
        return new
    i, rest = path[0], path[1:]
    children = list(node.children)
    children[i] = replace_at(children[i], rest, new)
    return Op(node.kind, node.k, node.negated, tuple(children))


def _count_planes(results: list[int]) -> list[int]:
    """Bit-sliced per-row sum of packed child results (little-endian planes)."""
    planes: list[int] = []
    for bits in results:
        carry = bits
        i = 0
        while carry:
            if i == len(planes):
                planes.append(0)
            t = planes[i] & carry
            planes[i] ^= carry
            carry = t
            i += 1
    return planes


def _compare_counts(planes: list[int], k: int, mask: int) -> tuple[int, int]:
    """Per-row (count > k, count == k) masks from bit-sliced counters."""
    width = max(len(planes), k.bit_length())
    gt = 0
    eq = mask
    for i in reversed(range(width)):
        p = planes[i] if i < len(planes) else 0
        if (k >> i) & 1:
            eq &= p
        else:
            gt |= eq & p
            eq &= ~p & mask
    return gt, eq


def evaluate(node: Node, X: BitMatrix) -> BitVector:
    """One prediction bit per row of ``X``."""
    mask = mask_for(X.num_rows)
    return BitVector(_evaluate(node, X, mask), X.num_rows)


def _evaluate(node: Node, X: BitMatrix, mask: int) -> int:
    if isinstance(node, Literal):
        if not 0 <= node.feature < X.num_cols:
            raise FeatureIndexError(node.feature, X.num_cols)
        bits = X.columns[node.feature]
        return bits ^ mask if node.negated else bits

    if isinstance(node, Trivial):
        return mask if node.value else 0

    results = [_evaluate(c, X, mask) for c in node.children]
    if node.kind == AND:
        out = mask
        for r in results:
            out &= r
    elif node.kind == OR:
        out = 0
        for r in results:
            out |= r
    else:
        planes = _count_planes(results)
        gt, eq = _compare_counts(planes, node.k, mask)
        if node.kind == ATLEAST:
            out = gt | eq
        elif node.kind == ATMOST:
            out = mask & ~gt
        else:  # Choose
            out = eq
    return out ^ mask if node.negated else out


def confusion(pred: BitVector, y: BitVector) -> tuple[int, int, int, int]:
    """(TP, FP, FN, TN) via popcounts."""
    tp = (pred & y).popcount()
    fp = (pred & ~y).popcount()
    fn = (~pred & y).popcount()
    tn = y.n - tp - fp - fn
    return tp, fp, fn, tn


def score_predictions(pred: BitVector, y: BitVector,
                      metric: str = BALANCED_ACCURACY) -> float:
    if y.n == 0:
        raise FormulaError("cannot score an empty dataset")
    tp, fp, fn, tn = confusion(pred, y)
    if metric == ACCURACY:
        return (tp + tn) / y.n
    if metric != BALANCED_ACCURACY:
        raise FormulaError(f"unknown metric {metric!r}")
    # A class absent from the slice contributes a recall of 1.
    pos = tp + fn
    neg = tn + fp
    recall_p = tp / pos if pos else 1.0
    recall_n = tn / neg if neg else 1.0
    return 0.5 * (recall_p + recall_n)


def score(node: Node, X: BitMatrix, y: BitVector,
          metric: str = BALANCED_ACCURACY) -> float:
    if X.num_rows != y.n:
        raise FormulaError("matrix and labels disagree on row count")
    return score_predictions(evaluate(node, X), y, metric)


def objective(s: float, c: int, lam: float) -> float:
    """The combined score/complexity objective S - lambda * C."""
    if lam < 0:
        raise FormulaError("lambda must be non-negative")
    return s - lam * c


def to_json(node: Node, feature_names: Optional[list[str]] = None) -> dict:
    if isinstance(node, Literal):
        name = feature_names[node.feature] if feature_names else f"f{node.feature}"
        return {"type": "literal", "feature": node.feature,
                "name": name, "negated": node.negated}
    if isinstance(node, Trivial):
        return {"type": "trivial", "value": node.value}
    return {"type": "operator", "kind": node.kind, "k": node.k,
            "negated": node.negated,
            "children": [to_json(c, feature_names)
                         for c in node.sorted_children()]}


def from_json(obj: dict) -> Node:
    t = obj["type"]
    if t == "literal":
        return Literal(obj["feature"], obj["negated"])
    if t == "trivial":
        return Trivial(obj["value"])
    if t == "operator":
        return Op(obj["kind"], obj.get("k"), obj["negated"],
                  tuple(from_json(c) for c in obj["children"]))
    raise FormulaError(f"unknown node type {t!r}")
