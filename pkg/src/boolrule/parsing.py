"""Text form of formulas: ``And(Choose2(f0,f1,f2,f3),~f4,f5)``.

Printing is canonical (children sorted), so ``parse(to_text(f)) == f``.
Names of the form ``f<digits>`` map directly to feature indices; any other
identifiers are assigned indices in order of first appearance.
"""

from __future__ import annotations

import re
from typing import Optional

from .formula import (OPERATOR_KINDS, PARAMETERIZED, FormulaError, Literal,
                      Node, Op, Trivial)


class ParseError(FormulaError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


def to_text(node: Node, feature_names: Optional[list[str]] = None) -> str:
    neg = "~" if getattr(node, "negated", False) else ""
    if isinstance(node, Literal):
        name = feature_names[node.feature] if feature_names else f"f{node.feature}"
        return f"{neg}{name}"
    if isinstance(node, Trivial):
        return "One()" if node.value else "Zero()"
    param = str(node.k) if node.kind in PARAMETERIZED else ""
    args = ",".join(to_text(c, feature_names) for c in node.sorted_children())
    return f"{neg}{node.kind}{param}({args})"


_TOKEN = re.compile(r"\s*(~|\(|\)|,|[A-Za-z_][A-Za-z0-9_]*|\d+)")

_OP_RE = re.compile(r"^(And|Or|AtLeast|AtMost|Choose)(\d*)$")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.names: dict[str, int] = {}

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, char: str):
        if self.peek() != char:
            raise ParseError(f"expected {char!r}", self.pos)
        self.pos += 1

    def identifier(self) -> str:
        self._skip_ws()
        m = re.match(r"[A-Za-z_][A-Za-z0-9_]*", self.text[self.pos:])
        if not m:
            raise ParseError("expected a name", self.pos)
        self.pos += m.end()
        return m.group(0)

    def feature_index(self, name: str) -> int:
        m = re.fullmatch(r"f(\d+)", name)
        if m:
            return int(m.group(1))
        if name not in self.names:
            self.names[name] = len(self.names)
        return self.names[name]

    def node(self) -> Node:
        negated = False
        if self.peek() == "~":
            self.take("~")
            negated = True
        start = self.pos
        name = self.identifier()
        if self.peek() != "(":
            lit = Literal(self.feature_index(name), negated)
            return lit
        if name in ("One", "Zero"):
            self.take("(")
            self.take(")")
            triv = Trivial(1 if name == "One" else 0)
            return Trivial(1 - triv.value) if negated else triv
        m = _OP_RE.match(name)
        if not m:
            raise ParseError(f"unknown operator {name!r}", start)
        kind, digits = m.group(1), m.group(2)
        if kind in PARAMETERIZED and not digits:
            raise ParseError(f"{kind} requires an integer parameter", start)
        if kind not in PARAMETERIZED and digits:
            raise ParseError(f"{kind} takes no parameter", start)
        k = int(digits) if digits else None
        self.take("(")
        children = [self.node()]
        while self.peek() == ",":
            self.take(",")
            children.append(self.node())
        self.take(")")
        try:
            return Op(kind, k, negated, tuple(children))
        except FormulaError as exc:
            raise ParseError(str(exc), start) from exc


def parse(text: str) -> Node:
    p = _Parser(text)
    node = p.node()
    p._skip_ws()
    if p.pos != len(text):
        raise ParseError("trailing input", p.pos)
    return node
