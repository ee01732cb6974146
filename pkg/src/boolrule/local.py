"""Simulated-annealing native local solver.

Each start draws an initial depth-one rule, then proposes small structural
moves found by rejection sampling (pick a node, cycle through that node
class's move types, draw a random concrete move, restart until valid).
Moves are accepted by the Metropolis criterion on the objective S - lambda*C
under a geometric temperature schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import cycle
from typing import Optional

import numpy as np

from .bitvec import BitMatrix, BitVector
from .formula import (BALANCED_ACCURACY, OPERATOR_KINDS, PARAMETERIZED,
                      Literal, Node, Op, complexity, evaluate, iter_nodes,
                      node_at, objective, replace_at, score_predictions)

LITERAL_MOVE_TYPES = ("remove_literal", "expand_literal_to_operator",
                      "swap_literal")
OPERATOR_MOVE_TYPES = ("remove_operator", "add_literal", "swap_operator")


@dataclass
class SolverConfig:
    num_starts: int = 20
    num_iterations: int = 2000
    t_high: float = 0.2
    t_low: float = 1e-6
    max_complexity: Optional[int] = None
    lam: float = 0.0
    metric: str = BALANCED_ACCURACY
    seed: int = 0

    def __post_init__(self):
        if not self.t_high > self.t_low > 0:
            raise ValueError("need t_high > t_low > 0")
        if self.num_iterations < 2:
            raise ValueError("need at least 2 iterations")
        if self.max_complexity is not None and self.max_complexity < 3:
            raise ValueError("max_complexity must be at least 3")


@dataclass(frozen=True)
class Move:
    kind: str
    path: tuple
    literal: Optional[Literal] = None      # swap/add/expand target literal
    sibling_index: Optional[int] = None    # expand: sibling to pull in
    op_kind: Optional[str] = None          # expand/swap_operator
    op_k: Optional[int] = None
    subtree: Optional[Node] = None         # non-local splice


@dataclass
class Trace:
    """Per-iteration solver history, CSV-exportable for objective plots."""
    start: list[int] = field(default_factory=list)
    iteration: list[int] = field(default_factory=list)
    temperature: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    accepted: list[bool] = field(default_factory=list)
    proposal: list[str] = field(default_factory=list)
    subproblem_size: list[int] = field(default_factory=list)
    subproblem_seconds: list[float] = field(default_factory=list)
    best_per_start: list[float] = field(default_factory=list)

    def record(self, start, iteration, temperature, obj, accepted,
               proposal="local", sub_size=0, sub_seconds=0.0):
        self.start.append(start)
        self.iteration.append(iteration)
        self.temperature.append(temperature)
        self.objective.append(obj)
        self.accepted.append(accepted)
        self.proposal.append(proposal)
        self.subproblem_size.append(sub_size)
        self.subproblem_seconds.append(sub_seconds)

    def to_csv(self, path: str):
        with open(path, "w") as fh:
            fh.write("start,iteration,temperature,objective,accepted,"
                     "proposal,subproblem_size,subproblem_seconds\n")
            for i in range(len(self.iteration)):
                fh.write(f"{self.start[i]},{self.iteration[i]},"
                         f"{self.temperature[i]:.6g},{self.objective[i]:.6f},"
                         f"{int(self.accepted[i])},{self.proposal[i]},"
                         f"{self.subproblem_size[i]},"
                         f"{self.subproblem_seconds[i]:.6f}\n")


def temperature(i: int, config: SolverConfig) -> float:
    """Geometric schedule hitting t_high at i=0 and t_low at the last step."""
    frac = i / (config.num_iterations - 1)
    return config.t_high * (config.t_low / config.t_high) ** frac


def metropolis_accept(d_e: float, t: float, rng: np.random.Generator) -> bool:
    return d_e >= 0 or rng.random() < math.exp(d_e / t)


def _random_operator(rng: np.random.Generator, num_children: int) -> tuple[str, Optional[int]]:
    kind = OPERATOR_KINDS[rng.integers(len(OPERATOR_KINDS))]
    k = int(rng.integers(num_children + 1)) if kind in PARAMETERIZED else None
    return kind, k


def generate_initial_rule(num_features: int, max_complexity: Optional[int],
                          rng: np.random.Generator) -> Node:
    """Random depth-one rule with 2..C'-1 literals over distinct features."""
    if num_features < 2:
        raise ValueError("need at least 2 features")
    cap = num_features if max_complexity is None else \
        min(max_complexity - 1, num_features)
    cap = max(cap, 2)
    n_lits = int(rng.integers(2, cap + 1))
    feats = rng.choice(num_features, size=n_lits, replace=False)
    lits = tuple(Literal(int(f), bool(rng.integers(2))) for f in feats)
    kind, k = _random_operator(rng, n_lits)
    return Op(kind, k, False, lits)


def _clamp_k(kind: str, k: Optional[int], num_children: int) -> Optional[int]:
    if kind in PARAMETERIZED:
        return min(k, num_children)
    return None


def _literal_features(op: Op) -> set[int]:
    return {c.feature for c in op.children if isinstance(c, Literal)}


def propose_local_move(rule: Node, num_features: int,
                       max_complexity: Optional[int],
                       rng: np.random.Generator,
                       move_cycles: Optional[tuple] = None) -> Move:
    """Rejection-sampling proposal over all nodes and move types."""
    if move_cycles is None:
        move_cycles = (cycle(LITERAL_MOVE_TYPES), cycle(OPERATOR_MOVE_TYPES))
    lit_cycle, op_cycle = move_cycles
    nodes = list(iter_nodes(rule))
    size = complexity(rule)
    room = max_complexity is None or size < max_complexity
    while True:
        path, node = nodes[rng.integers(len(nodes))]
        if isinstance(node, Literal):
            move_type = next(lit_cycle)
            move = _draw_literal_move(rule, path, node, move_type,
                                      num_features, room, rng)
        else:
            move_type = next(op_cycle)
            move = _draw_operator_move(rule, path, node, move_type,
                                       num_features, room, rng)
        if move is not None:
            return move


def _draw_literal_move(rule, path, node, move_type, num_features, room, rng):
    parent = node_at(rule, path[:-1]) if path else None
    if move_type == "remove_literal":
        if parent is None or len(parent.children) < 3:
            return None
        return Move("remove_literal", path)
    if move_type == "expand_literal_to_operator":
        if parent is None or len(parent.children) < 3 or not room:
            return None
        siblings = [i for i, c in enumerate(parent.children)
                    if isinstance(c, Literal) and i != path[-1]]
        if not siblings:
            return None
        sib = siblings[rng.integers(len(siblings))]
        kind, k = _random_operator(rng, 2)
        return Move("expand_literal_to_operator", path,
                    sibling_index=sib, op_kind=kind, op_k=k)
    # swap_literal: the negation is always available; otherwise any literal
    # over a feature not already under the parent.
    used = _literal_features(parent) if parent is not None else {node.feature}
    free = num_features - len(used)
    total = 1 + 2 * free
    pick = int(rng.integers(total))
    if pick == 0:
        new = Literal(node.feature, not node.negated)
    else:
        pick -= 1
        feats = [f for f in range(num_features) if f not in used]
        new = Literal(feats[pick // 2], bool(pick % 2))
    return Move("swap_literal", path, literal=new)


def _draw_operator_move(rule, path, node, move_type, num_features, room, rng):
    if move_type == "remove_operator":
        if not path:
            return None
        parent = node_at(rule, path[:-1])
        if len(parent.children) < 3:
            return None
        return Move("remove_operator", path)
    if move_type == "add_literal":
        if not room:
            return None
        feature = int(rng.integers(num_features))
        if feature in _literal_features(node):
            return None
        return Move("add_literal", path,
                    literal=Literal(feature, bool(rng.integers(2))))
    # swap_operator: uniform over all (kind, k) pairs valid for the current
    # child count, rejecting the identity pair.
    c = len(node.children)
    kind, k = _random_operator(rng, c)
    if kind == node.kind and k == node.k:
        return None
    return Move("swap_operator", path, op_kind=kind, op_k=k)


def apply_move(rule: Node, move: Move) -> Node:
    """Apply a move, returning a new formula; the input is never mutated."""
    if move.kind == "splice":
        return replace_at(rule, move.path, move.subtree)

    if move.kind in ("remove_literal", "remove_operator"):
        parent_path = move.path[:-1]
        parent = node_at(rule, parent_path)
        children = tuple(c for i, c in enumerate(parent.children)
                         if i != move.path[-1])
        new_parent = Op(parent.kind, _clamp_k(parent.kind, parent.k, len(children)),
                        parent.negated, children)
        return replace_at(rule, parent_path, new_parent)

    if move.kind == "expand_literal_to_operator":
        parent_path = move.path[:-1]
        parent = node_at(rule, parent_path)
        target = parent.children[move.path[-1]]
        sibling = parent.children[move.sibling_index]
        new_op = Op(move.op_kind, move.op_k, False, (target, sibling))
        children = []
        for i, c in enumerate(parent.children):
            if i == move.path[-1]:
                children.append(new_op)
            elif i != move.sibling_index:
                children.append(c)
        children = tuple(children)
        new_parent = Op(parent.kind, _clamp_k(parent.kind, parent.k, len(children)),
                        parent.negated, children)
        return replace_at(rule, parent_path, new_parent)

    if move.kind == "swap_literal":
        return replace_at(rule, move.path, move.literal)

    if move.kind == "add_literal":
        node = node_at(rule, move.path)
        return replace_at(rule, move.path,
                          Op(node.kind, node.k, node.negated,
                             node.children + (move.literal,)))

    if move.kind == "swap_operator":
        node = node_at(rule, move.path)
        return replace_at(rule, move.path,
                          Op(move.op_kind, move.op_k, node.negated, node.children))

    raise ValueError(f"unknown move kind {move.kind!r}")


def solve(X: BitMatrix, y: BitVector, config: SolverConfig,
          nonlocal_config=None) -> tuple[Node, Trace]:
    """Multi-start SA over formulas; optionally with non-local moves.

    Returns the best rule by objective across all starts and the full trace.
    Deterministic given config.seed.
    """
    # imported here to avoid a module cycle with the non-local machinery
    from .subtree import propose_non_local_move

    if X.num_rows == 0:
        raise ValueError("empty dataset")
    if y.popcount() in (0, y.n):
        raise ValueError("both label classes must be present")
    num_features = X.num_cols
    trace = Trace()
    best_rule = None
    best_obj = -math.inf
    seeds = np.random.SeedSequence(config.seed).spawn(config.num_starts)
    burn_in = None
    if nonlocal_config is not None:
        burn_in = nonlocal_config.resolved_burn_in(config.num_iterations)

    for start in range(config.num_starts):
        rng = np.random.default_rng(seeds[start])
        cycles = (cycle(LITERAL_MOVE_TYPES), cycle(OPERATOR_MOVE_TYPES))
        rule = generate_initial_rule(num_features, config.max_complexity, rng)
        cur_obj = objective(
            score_predictions(evaluate(rule, X), y, config.metric),
            complexity(rule), config.lam)
        start_best = cur_obj
        since_improvement = 0
        if cur_obj > best_obj:
            best_obj = cur_obj
            best_rule = rule

        for i in range(config.num_iterations):
            t = temperature(i, config)
            proposal_kind = "local"
            sub_size = 0
            sub_secs = 0.0
            candidate = None
            if (nonlocal_config is not None and i > burn_in
                    and since_improvement >= nonlocal_config.patience):
                nl_move, sub_size, sub_secs = propose_non_local_move(
                    rule, X, y, config, nonlocal_config, rng)
                if nl_move is not None:
                    candidate = apply_move(rule, nl_move)
                    proposal_kind = "nonlocal"
            if candidate is None:
                move = propose_local_move(rule, num_features,
                                          config.max_complexity, rng, cycles)
                candidate = apply_move(rule, move)
            cand_obj = objective(
                score_predictions(evaluate(candidate, X), y, config.metric),
                complexity(candidate), config.lam)
            accepted = metropolis_accept(cand_obj - cur_obj, t, rng)
            if accepted:
                rule = candidate
                cur_obj = cand_obj
            since_improvement += 1
            if cur_obj > start_best:
                start_best = cur_obj
                since_improvement = 0
            if cur_obj > best_obj:
                best_obj = cur_obj
                best_rule = rule
            trace.record(start, i, t, cur_obj, accepted, proposal_kind,
                         sub_size, sub_secs)
        trace.best_per_start.append(start_best)

    return best_rule, trace
