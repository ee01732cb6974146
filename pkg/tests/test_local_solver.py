"""Local solver: initial rules, move proposal/application, acceptance,
temperature schedule, and the feasibility fuzz over random move chains."""

import math
from itertools import cycle

import numpy as np
import pytest

from boolrule.formula import (PARAMETERIZED, Literal, Op, complexity, depth,
                              evaluate, iter_nodes, objective,
                              score_predictions)
from boolrule.local import (LITERAL_MOVE_TYPES, OPERATOR_MOVE_TYPES, Move,
                            SolverConfig, apply_move, generate_initial_rule,
                            metropolis_accept, propose_local_move, solve,
                            temperature)

from conftest import make_dataset, random_dataset


def check_feasible(rule, max_complexity):
    """Node invariants are enforced by construction; check the cap and
    parameter bounds explicitly."""
    assert complexity(rule) <= max_complexity
    for _, node in iter_nodes(rule):
        if isinstance(node, Op):
            assert len(node.children) >= 2
            if node.kind in PARAMETERIZED:
                assert 0 <= node.k <= len(node.children)


def test_initial_rule_shape():
    rng = np.random.default_rng(0)
    for _ in range(300):
        rule = generate_initial_rule(8, 6, rng)
        assert depth(rule) == 1
        assert 2 <= len(rule.children) <= 5
        check_feasible(rule, 6)
    # cap collapses the range to exactly 2 literals
    for _ in range(20):
        rule = generate_initial_rule(8, 3, rng)
        assert len(rule.children) == 2
    # never more literals than features
    for _ in range(50):
        rule = generate_initial_rule(4, 20, rng)
        assert len(rule.children) <= 4


def test_temperature_schedule_endpoints():
    cfg = SolverConfig()
    assert temperature(0, cfg) == pytest.approx(0.2)
    assert temperature(cfg.num_iterations - 1, cfg) == pytest.approx(1e-6)
    cfg3 = SolverConfig(num_iterations=3, t_high=1.0, t_low=0.01)
    assert temperature(1, cfg3) == pytest.approx(0.1)


def test_metropolis_rule():
    rng = np.random.default_rng(1)
    assert all(metropolis_accept(0.0, 0.5, rng) for _ in range(100))
    assert all(metropolis_accept(0.3, 0.5, rng) for _ in range(100))
    # dE = -T ln 2 accepts with probability 1/2; check within 3 sigma
    t, n = 0.1, 20000
    d = -t * math.log(2)
    hits = sum(metropolis_accept(d, t, rng) for _ in range(n))
    sigma = math.sqrt(n * 0.25)
    assert abs(hits - n / 2) < 3 * sigma


def test_propose_always_valid_and_remove_rejected_on_pairs():
    rng = np.random.default_rng(2)
    rule = Op("Or", None, False, (Literal(0), Literal(1)))
    seen = set()
    for _ in range(200):
        mv = propose_local_move(rule, 4, 6, rng)
        seen.add(mv.kind)
        new = apply_move(rule, mv)
        check_feasible(new, 6)
    # a two-literal operator admits no literal/operator removal
    assert "remove_literal" not in seen
    assert "remove_operator" not in seen
    assert "swap_literal" in seen


def test_apply_move_semantics():
    rule = Op("And", None, False,
              (Op("Choose", 2, False,
                  (Literal(0), Literal(1), Literal(2), Literal(3))),
               Literal(4, True), Literal(5)))
    # remove a literal: parameter stays when still valid
    out = apply_move(rule, Move("remove_literal", (0, 3)))
    assert out.children[0] == Op("Choose", 2, False,
                                 (Literal(0), Literal(1), Literal(2)))
    # remove the nested operator entirely
    out = apply_move(rule, Move("remove_operator", (0,)))
    assert out == Op("And", None, False, (Literal(4, True), Literal(5)))
    # expand a literal pulls one sibling under the fresh operator
    out = apply_move(rule, Move("expand_literal_to_operator", (0, 0),
                                sibling_index=1, op_kind="And", op_k=None))
    inner = out.children[0]
    assert inner.children[0] == Op("And", None, False, (Literal(0), Literal(1)))
    assert inner.k == 2 and len(inner.children) == 3
    # add / swap
    out = apply_move(rule, Move("add_literal", (0,), literal=Literal(6)))
    assert len(out.children[0].children) == 5
    out = apply_move(rule, Move("swap_operator", (0,), op_kind="Or", op_k=None))
    assert out.children[0] == Op("Or", None, False,
                                 (Literal(0), Literal(1), Literal(2), Literal(3)))
    out = apply_move(rule, Move("swap_literal", (1,), literal=Literal(4)))
    assert out.children[1] == Literal(4)


def test_remove_clamps_parameter_down():
    rule = Op("AtLeast", 3, False, (Literal(0), Literal(1), Literal(2)))
    out = apply_move(rule, Move("remove_literal", (2,)))
    assert out == Op("AtLeast", 2, False, (Literal(0), Literal(1)))


def test_apply_move_does_not_mutate_input():
    rng = np.random.default_rng(3)
    rule = generate_initial_rule(6, 8, rng)
    snapshot = rule
    for _ in range(100):
        mv = propose_local_move(rule, 6, 8, rng)
        apply_move(rule, mv)
        assert rule == snapshot


def test_feasibility_fuzz_hundred_thousand_moves():
    """10^5 random accepted moves from 100 random starts: every intermediate
    rule obeys the node invariants and the complexity cap."""
    rng = np.random.default_rng(4)
    moves_per_start = 1000
    for start in range(100):
        m = int(rng.integers(3, 9))
        cap = int(rng.integers(4, 11))
        rule = generate_initial_rule(m, cap, rng)
        cycles = (cycle(LITERAL_MOVE_TYPES), cycle(OPERATOR_MOVE_TYPES))
        check_feasible(rule, cap)
        for _ in range(moves_per_start):
            mv = propose_local_move(rule, m, cap, rng, cycles)
            rule = apply_move(rule, mv)
            check_feasible(rule, cap)


def test_solve_returns_best_across_starts(atleast3_dataset):
    X, y = atleast3_dataset
    cfg = SolverConfig(num_starts=4, num_iterations=200, max_complexity=6,
                       seed=0)
    rule, trace = solve(X, y, cfg)
    best = max(trace.objective)
    got = objective(score_predictions(evaluate(rule, X), y, cfg.metric),
                    complexity(rule), cfg.lam)
    assert got == pytest.approx(max(best, max(trace.best_per_start)))
    assert len(trace.best_per_start) == 4
    assert len(trace.iteration) == 4 * 200


def test_solve_deterministic(atleast3_dataset):
    X, y = atleast3_dataset
    cfg = SolverConfig(num_starts=3, num_iterations=150, max_complexity=6,
                       seed=7)
    r1, t1 = solve(X, y, cfg)
    r2, t2 = solve(X, y, cfg)
    assert r1 == r2
    assert t1.objective == t2.objective


def test_solve_recovers_single_column_label():
    rng = np.random.default_rng(8)
    dense = rng.integers(0, 2, size=(40, 4))
    dense[:, 1] &= dense[:, 0]          # f1 implies f0, so Or(f0, f1) == f0
    X, y = make_dataset(dense, dense[:, 0])
    cfg = SolverConfig(num_starts=5, num_iterations=300, max_complexity=3,
                       seed=1)
    rule, trace = solve(X, y, cfg)
    assert max(trace.best_per_start) == pytest.approx(1.0)


def test_large_lambda_prefers_small_rules(atleast3_dataset):
    X, y = atleast3_dataset
    cfg = SolverConfig(num_starts=5, num_iterations=300, max_complexity=8,
                       lam=1.0, seed=2)
    rule, _ = solve(X, y, cfg)
    assert complexity(rule) == 3   # smallest feasible rule wins


def test_solve_rejects_degenerate_labels(atleast3_dataset):
    X, y = atleast3_dataset
    ones = ~(y ^ y)
    with pytest.raises(ValueError):
        solve(X, ones, SolverConfig(num_starts=1, num_iterations=10))
