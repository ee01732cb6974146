"""Text round-trip tests for the formula parser and printer."""

import numpy as np
import pytest

from boolrule.formula import AND, ATLEAST, CHOOSE, OR, Literal, Op, Trivial
from boolrule.parsing import ParseError, parse, to_text

from conftest import random_rule


def test_parse_simple():
    assert parse("f0") == Literal(0)
    assert parse("~f3") == Literal(3, True)
    assert parse("And(f0,~f1)") == Op(AND, None, False,
                                      (Literal(0), Literal(1, True)))
    assert parse("Choose2(f0,f1,f2)") == Op(CHOOSE, 2, False,
                                            (Literal(0), Literal(1), Literal(2)))
    assert parse("~Or(f0,f1)") == Op(OR, None, True, (Literal(0), Literal(1)))
    assert parse("One()") == Trivial(1)
    assert parse("~Zero()") == Trivial(1)


def test_parse_whitespace_and_names():
    rule = parse(" Or( age_gt_30 , ~income_low ) ")
    assert rule == Op(OR, None, False, (Literal(0), Literal(1, True)))


def test_roundtrip_random_rules():
    rng = np.random.default_rng(17)
    for _ in range(200):
        rule = random_rule(rng, 8, 9)
        assert parse(to_text(rule)) == rule


def test_printing_is_canonical():
    a = Op(OR, None, False, (Literal(1), Literal(0, True)))
    b = Op(OR, None, False, (Literal(0, True), Literal(1)))
    assert to_text(a) == to_text(b)


def test_parse_errors():
    for bad in ("", "And(f0)", "AtLeast(f0,f1)", "And2(f0,f1)",
                "Or(f0,f1) trailing", "Foo(f0,f1)", "Or(f0,f0)"):
        with pytest.raises(ParseError):
            parse(bad)


def test_feature_names_used_when_given():
    rule = Op(AND, None, False, (Literal(0), Literal(1, True)))
    text = to_text(rule, feature_names=["age > 30", "smoker"])
    assert "age > 30" in text and "~smoker" in text
