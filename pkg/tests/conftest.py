"""Shared helpers: random datasets, random rules, and tiny fixtures."""

import itertools

import numpy as np
import pytest

from boolrule.bitvec import BitMatrix, BitVector
from boolrule.formula import (OPERATOR_KINDS, PARAMETERIZED, Literal, Op,
                              Node)


# verdict lines from the acceptance tests, echoed after the run so they
# appear in the log even when their tests pass
CRITERION_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


def make_dataset(array, labels):
    X = BitMatrix.from_bools(np.asarray(array, dtype=bool))
    y = BitVector.from_bools(np.asarray(labels, dtype=bool))
    return X, y


def random_dataset(rng, num_features, num_rows, ensure_both_classes=True):
    """Random binary matrix and labels; resamples until both classes appear."""
    X = rng.integers(0, 2, size=(num_rows, num_features))
    while True:
        y = rng.integers(0, 2, size=num_rows)
        if not ensure_both_classes or 0 < y.sum() < num_rows:
            break
    return make_dataset(X, y)


def planted_dataset(rng, num_features, num_rows, max_literals, noise=0.1):
    """Labels from a random depth-one rule with a fraction of flipped bits."""
    from boolrule.formula import evaluate

    X = rng.integers(0, 2, size=(num_rows, num_features))
    Xb = BitMatrix.from_bools(X.astype(bool))
    n_lits = int(rng.integers(1, max_literals + 1))
    feats = rng.choice(num_features, size=n_lits, replace=False)
    lits = tuple(Literal(int(f), bool(rng.integers(2))) for f in feats)
    if len(lits) == 1:
        rule = lits[0]
    else:
        kind = OPERATOR_KINDS[rng.integers(len(OPERATOR_KINDS))]
        k = int(rng.integers(len(lits) + 1)) if kind in PARAMETERIZED else None
        rule = Op(kind, k, False, lits)
    y = evaluate(rule, Xb).to_bools().astype(int)
    flip = rng.random(num_rows) < noise
    y = np.where(flip, 1 - y, y)
    if y.sum() in (0, num_rows):
        y[0] = 1 - y[0]
    return Xb, BitVector.from_bools(y.astype(bool))


def _random_op(rng, children):
    kind = OPERATOR_KINDS[rng.integers(len(OPERATOR_KINDS))]
    k = int(rng.integers(len(children) + 1)) if kind in PARAMETERIZED else None
    return Op(kind, k, bool(rng.integers(2)), tuple(children))


def random_rule(rng, num_features, max_complexity) -> Node:
    """Random feasible rule within the complexity cap (depth 1 or 2)."""
    from boolrule.formula import complexity

    n_lits = int(rng.integers(2, min(max_complexity - 1, num_features) + 1))
    feats = rng.choice(num_features, size=n_lits, replace=False)
    children = [Literal(int(f), bool(rng.integers(2))) for f in feats]
    rule = _random_op(rng, children)
    # sometimes nest two of the literals under a fresh operator
    if n_lits >= 3 and complexity(rule) + 1 <= max_complexity and rng.random() < 0.5:
        inner = _random_op(rng, children[:2])
        rule = _random_op(rng, [inner] + children[2:])
    assert complexity(rule) <= max_complexity
    return rule


@pytest.fixture
def atleast3_dataset():
    """All 32 rows over 5 binary features, labeled by a 3-of-5 threshold."""
    rows = list(itertools.product([0, 1], repeat=5))
    X = np.array(rows)
    y = (X.sum(axis=1) >= 3).astype(int)
    return make_dataset(X, y)
