"""Non-local moves: replace a subtree with an optimal depth-one rule.

A target node is chosen, the rule is evaluated twice with the target pinned
to constant 0 and constant 1, and rows where the two outcomes agree are
predetermined: the subtree cannot influence them.  The remaining rows form
the effective subproblem, labeled by whichever subtree output classifies
the full rule correctly.  A depth-one solver (brute-force oracle or QUBO
annealer) then fits a replacement within the complexity budget left by the
global cap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bitvec import BitMatrix, BitVector, mask_for, take_bits
from .data import class_weights
from .formula import (AND, ATLEAST, ATMOST, CHOOSE, OR, OPERATOR_KINDS,
                      Literal, Op, Trivial, complexity, evaluate, iter_nodes,
                      node_at, replace_at)
from .local import Move
from .oracle import EnumerationCapError, brute_force_depth_one


@dataclass
class NonLocalConfig:
    patience: int = 10
    burn_in: Optional[int] = None      # default: first third of iterations
    max_samples: int = 100
    backend: str = "oracle"            # "oracle" | "qubo"
    operators: tuple = OPERATOR_KINDS
    enumeration_cap: int = 10 ** 6
    num_reads: int = 20
    num_sweeps: int = 500

    def resolved_burn_in(self, num_iterations: int) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return num_iterations // 3


@dataclass
class EffectiveSubproblem:
    X: BitMatrix
    y: BitVector
    rows: list                  # original row indices retained


def effective_subproblem(rule, target_path, X: BitMatrix, y: BitVector,
                         max_samples: Optional[int] = None,
                         rng: Optional[np.random.Generator] = None
                         ) -> EffectiveSubproblem:
    """Rows whose classification depends on the target subtree's output,
    labeled by the output value that classifies them correctly."""
    lo = evaluate(replace_at(rule, target_path, Trivial(0)), X)
    hi = evaluate(replace_at(rule, target_path, Trivial(1)), X)
    mask = mask_for(y.n)
    differs = (lo.bits ^ hi.bits) & mask
    # where they differ, exactly one of the two matches the label; the
    # subtree value behind the matching branch is the effective label
    correct_hi = ~(hi.bits ^ y.bits) & mask
    rows = [r for r in range(y.n) if (differs >> r) & 1]
    if max_samples is not None and len(rows) > max_samples:
        if rng is None:
            rng = np.random.default_rng(0)
        picked = rng.choice(len(rows), size=max_samples, replace=False)
        rows = [rows[i] for i in sorted(picked)]
    idx = rows
    sub_x = BitMatrix([take_bits(BitVector(c, y.n), idx).bits
                       for c in X.columns], len(idx))
    sub_y = take_bits(BitVector(correct_hi, y.n), idx)
    return EffectiveSubproblem(sub_x, sub_y, idx)


def subtree_budget(rule, target_path, max_complexity: int):
    """Literal budget for a replacement at target_path: the global cap minus
    the complexity of everything outside the target, minus one operator
    node.  At the root the replacement must keep at least two literals."""
    outside = complexity(rule) - complexity(node_at(rule, target_path))
    budget = max_complexity - outside
    max_literals = budget - 1
    min_literals = 2 if target_path == () else 1
    return max_literals, min_literals


def _informative_columns(X: BitMatrix) -> list:
    mask = mask_for(X.num_rows)
    keep = []
    for i, col in enumerate(X.columns):
        c = col & mask
        if c != 0 and c != mask:
            keep.append(i)
    return keep


def optimize_subtree(sub: EffectiveSubproblem, operator: str,
                     max_literals: int, min_literals: int,
                     config: NonLocalConfig, lam: float = 0.0,
                     seed: int = 0):
    """Best depth-one rule for the subproblem, or None when it cannot be
    solved (degenerate data, cap exceeded)."""
    n_p = sub.y.popcount()
    features = _informative_columns(sub.X)
    if not features or max_literals < min_literals or max_literals < 1:
        return None
    weights = None
    if 0 < n_p < sub.y.n:
        weights = class_weights(sub.y)
    if config.backend == "qubo" and weights is not None and max_literals >= 2:
        from .ilp import build_ilp
        from .qubo import solve_qubo
        cols = [sub.X.columns[i] for i in features]
        x_sub = BitMatrix(cols, sub.X.num_rows)
        model = build_ilp(x_sub, sub.y, operator, max_literals, lam,
                          min_literals=min_literals)
        sol = solve_qubo(model, num_reads=config.num_reads,
                         num_sweeps=config.num_sweeps, seed=seed)
        if sol is None or not sol.feasible:
            return None
        remap = tuple(sorted((features[f], neg) for f, neg in sol.literals))
        return sol.__class__(remap, sol.operator, sol.k, sol.objective,
                             sol.weighted_error)
    try:
        return brute_force_depth_one(
            sub.X, sub.y, operator, max_literals, lam=lam, weights=weights,
            min_literals=min_literals, features=features,
            cap=config.enumeration_cap)
    except EnumerationCapError:
        return None


def propose_non_local_move(rule, X: BitMatrix, y: BitVector, solver_config,
                           config: NonLocalConfig, rng: np.random.Generator):
    """Draw a target node and operator, solve the effective depth-one
    subproblem, and return (move, subproblem_size, seconds).  The move is
    None when no usable replacement exists."""
    t0 = time.perf_counter()
    max_complexity = solver_config.max_complexity
    if max_complexity is None:
        # without a global cap, allow growth by a couple of nodes per move
        max_complexity = complexity(rule) + 2
    nodes = [path for path, node in iter_nodes(rule)
             if not isinstance(node, Trivial)]
    path = nodes[rng.integers(len(nodes))]
    operator = config.operators[rng.integers(len(config.operators))]
    max_literals, min_literals = subtree_budget(rule, path, max_complexity)
    if max_literals < min_literals:
        return None, 0, time.perf_counter() - t0
    sub = effective_subproblem(rule, path, X, y, config.max_samples, rng)
    if sub.y.n == 0:
        return None, 0, time.perf_counter() - t0
    seed = int(rng.integers(2 ** 31 - 1))
    sol = optimize_subtree(sub, operator, max_literals, min_literals,
                           config, lam=solver_config.lam, seed=seed)
    elapsed = time.perf_counter() - t0
    if sol is None:
        return None, sub.y.n, elapsed
    subtree = sol.to_formula()
    if isinstance(subtree, Trivial):
        return None, sub.y.n, elapsed
    if isinstance(subtree, Literal) and path:
        # splicing a bare literal under an operator parent must not create
        # a duplicate feature among its siblings
        parent = node_at(rule, path[:-1])
        for i, child in enumerate(parent.children):
            if i == path[-1]:
                continue
            if isinstance(child, Literal) and child.feature == subtree.feature:
                return None, sub.y.n, elapsed
    if complexity(replace_at(rule, path, subtree)) > max_complexity:
        return None, sub.y.n, elapsed
    move = Move("splice", path, subtree=subtree)
    return move, sub.y.n, elapsed
