"""Exhaustive depth-one search: the exact oracle and search-space accounting.

Enumerates every literal subset (both polarities, no repeated feature) up to
the literal cap, and every valid parameter, minimizing weighted error plus
the complexity penalty.  Serves as the test oracle for the ILP/QUBO routes
and as the exact single-feature baseline at max_literals=1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Optional, Sequence

from .bitvec import BitMatrix, BitVector, mask_for
from .data import ClassWeights
from .formula import (AND, ATLEAST, ATMOST, CHOOSE, OR, PARAMETERIZED,
                      Literal, Node, Op, Trivial, _compare_counts,
                      _count_planes)


class EnumerationCapError(RuntimeError):
    def __init__(self, total: int, cap: int):
        super().__init__(
            f"depth-one enumeration needs {total} evaluations, above the cap "
            f"of {cap}; subsample the data or lower max_literals")


@dataclass(frozen=True)
class DepthOneSolution:
    """A depth-one rule: literal set, operator, parameter, and its quality."""
    literals: tuple            # ((feature, negated), ...)
    operator: str
    k: Optional[int]
    objective: float           # weighted error + lambda * num literals
    weighted_error: float
    feasible: bool = True
    conflicts: tuple = ()      # features selected in both polarities

    def to_formula(self) -> Node:
        lits = tuple(Literal(f, neg) for f, neg in self.literals)
        k = self.k
        if len(lits) >= 2:
            return Op(self.operator, k if self.operator in PARAMETERIZED else None,
                      False, lits)
        if len(lits) == 1:
            lit = lits[0]
            if self.operator == OR or self.operator == AND:
                return lit
            if self.operator == ATLEAST:
                return Trivial(1) if k == 0 else lit
            if self.operator == ATMOST:
                return Trivial(1) if k >= 1 else Literal(lit.feature, not lit.negated)
            # Choose
            if k == 0:
                return Literal(lit.feature, not lit.negated)
            return lit
        # no literals: the constant rule implied by the operator
        if self.operator == OR:
            return Trivial(0)
        if self.operator == AND:
            return Trivial(1)
        if self.operator == ATMOST:
            return Trivial(1)
        return Trivial(1) if k == 0 else Trivial(0)  # AtLeast / Choose


def predict_counts(count_gt_k: int, count_eq_k: int, mask: int,
                   operator: str) -> int:
    if operator == ATLEAST:
        return count_gt_k | count_eq_k
    if operator == ATMOST:
        return mask & ~count_gt_k
    return count_eq_k  # Choose


def weighted_error_bits(pred: int, ybits: int, mask: int,
                        weights: ClassWeights) -> float:
    fp = (pred & ~ybits & mask).bit_count()
    fn = (~pred & ybits & mask).bit_count()
    return weights.w_p * fn + weights.w_n * fp


def enumeration_size(num_features: int, max_literals: int,
                     operator: str, min_literals: int = 0) -> int:
    total = 0
    for l in range(min_literals, max_literals + 1):
        k_range = l + 1 if operator in PARAMETERIZED else 1
        total += math.comb(num_features, l) * (2 ** l) * k_range
    return total


def brute_force_depth_one(X: BitMatrix, y: BitVector, operator: str,
                          max_literals: int, lam: float = 0.0,
                          weights: Optional[ClassWeights] = None,
                          min_literals: int = 0,
                          features: Optional[Sequence[int]] = None,
                          cap: int = 10 ** 8) -> DepthOneSolution:
    """Exact optimum of the depth-one restriction of the rule objective."""
    if max_literals < max(min_literals, 1):
        raise ValueError("max_literals must be >= max(min_literals, 1)")
    if weights is None:
        weights = ClassWeights(1.0, 1.0)
    if features is None:
        features = range(X.num_cols)
    features = sorted(features)
    total = enumeration_size(len(features), max_literals, operator, min_literals)
    if total > cap:
        raise EnumerationCapError(total, cap)

    mask = mask_for(X.num_rows)
    ybits = y.bits
    parameterized = operator in PARAMETERIZED
    best: Optional[DepthOneSolution] = None

    def consider(lits: tuple, k: Optional[int], pred: int):
        nonlocal best
        err = weighted_error_bits(pred, ybits, mask, weights)
        obj = err + lam * len(lits)
        if best is None or obj < best.objective - 1e-12:
            best = DepthOneSolution(lits, operator, k, obj, err)

    for l in range(min_literals, max_literals + 1):
        if l == 0:
            if operator == OR:
                consider((), None, 0)
            elif operator == AND:
                consider((), None, mask)
            elif operator == ATMOST:
                consider((), 0, mask)
            else:  # AtLeast / Choose: k = 0 is constant true
                consider((), 0, mask)
            continue
        for feats in combinations(features, l):
            for negs in product((False, True), repeat=l):
                cols = [X.columns[f] ^ mask if neg else X.columns[f]
                        for f, neg in zip(feats, negs)]
                lits = tuple(zip(feats, negs))
                if operator == OR:
                    pred = 0
                    for c in cols:
                        pred |= c
                    consider(lits, None, pred)
                elif operator == AND:
                    pred = mask
                    for c in cols:
                        pred &= c
                    consider(lits, None, pred)
                else:
                    planes = _count_planes(cols)
                    for k in range(l + 1):
                        gt, eq = _compare_counts(planes, k, mask)
                        consider(lits, k, predict_counts(gt, eq, mask, operator))
    return best


def count_feasible(num_features: int, max_literals: int) -> int:
    """Exact size of the depth-one feasible space: sum of C(2m, l)."""
    return sum(math.comb(2 * num_features, l) for l in range(max_literals + 1))
