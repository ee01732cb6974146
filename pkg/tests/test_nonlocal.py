"""Non-local (subtree replacement) moves: effective subproblems, budgets,
and optimality of proposed replacements."""

import numpy as np
import pytest

from boolrule.bitvec import BitMatrix, BitVector
from boolrule.formula import (Literal, Op, Trivial, complexity, evaluate,
                              node_at, replace_at, score)
from boolrule.local import SolverConfig, apply_move, solve
from boolrule.oracle import brute_force_depth_one
from boolrule.subtree import (NonLocalConfig, effective_subproblem,
                              optimize_subtree, propose_non_local_move,
                              subtree_budget)

from conftest import make_dataset, planted_dataset, random_dataset


def test_effective_subproblem_drops_predetermined_rows():
    # rule = Or(f0, f1); replacing f1: rows with f0=1 are predetermined
    X, y = make_dataset([[1, 0], [1, 1], [0, 1], [0, 0]], [1, 1, 1, 0])
    rule = Op("Or", None, False, (Literal(0), Literal(1)))
    sub = effective_subproblem(rule, (1,), X, y)
    assert sub.rows == [2, 3]
    # row 2 is positive: the subtree must output 1; row 3 negative: 0
    assert sub.y.to_bools().tolist() == [True, False]


def test_effective_labels_make_rule_correct():
    """Forcing the subtree output to the effective label classifies each
    retained row correctly, whichever subtree occupies the slot."""
    rng = np.random.default_rng(0)
    for _ in range(50):
        X, y = random_dataset(rng, 4, 20)
        rule = Op("AtLeast", 1, False,
                  (Op("And", None, False, (Literal(0), Literal(1, True))),
                   Literal(2)))
        paths = [(), (0,), (1,)]
        path = paths[rng.integers(len(paths))]
        sub = effective_subproblem(rule, path, X, y)
        for local_row, orig_row in enumerate(sub.rows):
            val = int(sub.y[local_row])
            forced = evaluate(replace_at(rule, path, Trivial(val)), X)
            assert forced[orig_row] == y[orig_row]


def test_effective_subproblem_subsampling():
    rng = np.random.default_rng(1)
    X, y = random_dataset(rng, 3, 200)
    rule = Op("Or", None, False, (Literal(0), Literal(1)))
    sub = effective_subproblem(rule, (1,), X, y, max_samples=30, rng=rng)
    assert sub.y.n <= 30
    assert sub.rows == sorted(sub.rows)


def test_subtree_budget():
    rule = Op("Or", None, False,
              (Op("And", None, False, (Literal(0), Literal(1))), Literal(2)))
    # replacing the And: outside = 2 nodes, budget C' - 2, minus the operator
    assert subtree_budget(rule, (0,), 7) == (4, 1)
    # at the root everything may be replaced but two literals are required
    assert subtree_budget(rule, (), 7) == (6, 2)


def test_optimize_subtree_is_oracle_optimal():
    from boolrule.data import class_weights

    rng = np.random.default_rng(2)
    cfg = NonLocalConfig()
    checked = 0
    for _ in range(20):
        X, y = planted_dataset(rng, 4, 25, 2)
        sub = effective_subproblem(
            Op("Or", None, False, (Literal(0), Literal(1))), (1,), X, y)
        if sub.y.n == 0 or sub.y.popcount() in (0, sub.y.n):
            continue
        sol = optimize_subtree(sub, "Or", 2, 1, cfg)
        if sol is None:
            continue
        want = brute_force_depth_one(sub.X, sub.y, "Or", 2,
                                     weights=class_weights(sub.y),
                                     min_literals=1)
        assert sol.objective <= want.objective + 1e-9
        checked += 1
    assert checked > 5


def test_proposed_move_respects_cap_and_improves_subproblem():
    rng = np.random.default_rng(3)
    X, y = planted_dataset(rng, 5, 40, 3)
    solver_cfg = SolverConfig(max_complexity=7)
    nl = NonLocalConfig()
    rule = Op("Or", None, False,
              (Op("And", None, False, (Literal(0), Literal(1))), Literal(2)))
    for _ in range(50):
        move, size, secs = propose_non_local_move(rule, X, y, solver_cfg,
                                                  nl, rng)
        if move is None:
            continue
        new = apply_move(rule, move)
        assert complexity(new) <= 7
        assert move.kind == "splice"


def test_qubo_backend_path():
    rng = np.random.default_rng(4)
    X, y = planted_dataset(rng, 4, 30, 2)
    solver_cfg = SolverConfig(max_complexity=7)
    nl = NonLocalConfig(backend="qubo", num_reads=10, num_sweeps=200)
    rule = Op("Or", None, False,
              (Op("And", None, False, (Literal(0), Literal(1))), Literal(2)))
    proposed = 0
    for _ in range(30):
        move, size, secs = propose_non_local_move(rule, X, y, solver_cfg,
                                                  nl, rng)
        if move is not None:
            proposed += 1
            assert complexity(apply_move(rule, move)) <= 7
    assert proposed > 0


def test_nonlocal_solve_improves_on_planted_depth_two():
    """A depth-two planted rule is recovered faster (or at least as fast)
    with non-local moves enabled, on average over paired seeds."""
    import itertools
    rows = np.array(list(itertools.product([0, 1], repeat=4)))
    labels = ((rows[:, 0] & rows[:, 1]) | (rows[:, 2] & rows[:, 3]))
    X, y = make_dataset(rows, labels)
    nl = NonLocalConfig(patience=5)
    cfg = SolverConfig(num_starts=2, num_iterations=120, max_complexity=7,
                       seed=0)
    best_local, best_nonlocal = [], []
    for seed in range(5):
        cfg_s = SolverConfig(num_starts=2, num_iterations=120,
                             max_complexity=7, seed=seed)
        _, t_local = solve(X, y, cfg_s)
        _, t_nl = solve(X, y, cfg_s, nonlocal_config=nl)
        best_local.append(max(t_local.best_per_start))
        best_nonlocal.append(max(t_nl.best_per_start))
    assert np.mean(best_nonlocal) >= np.mean(best_local) - 1e-9


def test_patience_gating():
    """Non-local proposals never appear before the burn-in boundary."""
    rng = np.random.default_rng(5)
    X, y = planted_dataset(rng, 4, 30, 2)
    nl = NonLocalConfig(patience=1)
    cfg = SolverConfig(num_starts=1, num_iterations=90, max_complexity=7,
                       seed=3)
    _, trace = solve(X, y, cfg, nonlocal_config=nl)
    burn_in = nl.resolved_burn_in(90)
    for it, kind in zip(trace.iteration, trace.proposal):
        if kind == "nonlocal":
            assert it > burn_in
