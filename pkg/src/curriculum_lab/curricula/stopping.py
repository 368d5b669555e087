"""Text stopping conditions such as ``"return>=1.0&&episodes>=1000"``.

Grammar (whitespace ignored)::

    expr   := conj ("||" conj)*
    conj   := term ("&&" term)*
    term   := atom | "(" expr ")"
    atom   := metric op number
    metric := "steps" | "episodes" | "tasks" | "return"
    op     := "<=" | ">=" | "<" | ">" | "="

``&&`` binds tighter than ``||``. A metric whose value is ``None`` (for
example ``return`` before its trailing window has filled) makes every atom
over it false.
"""

from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass
from typing import Mapping, Union

METRICS = ("steps", "episodes", "tasks", "return")
INTEGER_METRICS = frozenset({"steps", "episodes", "tasks"})
EQ_TOL = 1e-9

_OPS = {
    "<=": operator.le,
    ">=": operator.ge,
    "<": operator.lt,
    ">": operator.gt,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<and>&&)|(?P<or>\|\|)|(?P<lp>\()|(?P<rp>\))"
    r"|(?P<op><=|>=|<|>|=)"
    r"|(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_]+))"
)


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


@dataclass(frozen=True)
class Atom:
    metric: str
    op: str
    threshold: float

    def render(self) -> str:
        return f"{self.metric}{self.op}{self.threshold!r}"


@dataclass(frozen=True)
class And:
    clauses: tuple

    def render(self) -> str:
        return "&&".join(f"({c.render()})" if isinstance(c, Or) else c.render() for c in self.clauses)


@dataclass(frozen=True)
class Or:
    clauses: tuple

    def render(self) -> str:
        return "||".join(c.render() for c in self.clauses)


Condition = Union[Atom, And, Or]


def render(cond: Condition) -> str:
    return cond.render()


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind: str):
        tok = self.tokens[self.i]
        if tok[0] != kind:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {kind}, found {what}", tok[2])
        self.i += 1
        return tok

    def expr(self) -> Condition:
        clauses = [self.conj()]
        while self.peek()[0] == "or":
            self.take("or")
            clauses.append(self.conj())
        return clauses[0] if len(clauses) == 1 else Or(tuple(clauses))

    def conj(self) -> Condition:
        clauses = [self.term()]
        while self.peek()[0] == "and":
            self.take("and")
            clauses.append(self.term())
        return clauses[0] if len(clauses) == 1 else And(tuple(clauses))

    def term(self) -> Condition:
        if self.peek()[0] == "lp":
            self.take("lp")
            inner = self.expr()
            self.take("rp")
            return inner
        _, name, pos = self.take("name")
        if name not in METRICS:
            raise ParseError(f"unknown metric {name!r}", pos)
        _, op, _ = self.take("op")
        _, num, npos = self.take("num")
        value = float(num)
        if not math.isfinite(value):
            raise ParseError("threshold must be finite", npos)
        return Atom(name, op, value)


def parse_condition(text: str) -> Condition:
    if not text or not text.strip():
        raise ParseError("empty condition", 0)
    parser = _Parser(text)
    cond = parser.expr()
    parser.take("end")
    return cond


def evaluate(cond: Condition, metrics: Mapping[str, float | int | None]) -> bool:
    """Evaluate a condition against a snapshot of running metrics."""
    if isinstance(cond, And):
        return all(evaluate(c, metrics) for c in cond.clauses)
    if isinstance(cond, Or):
        return any(evaluate(c, metrics) for c in cond.clauses)
    value = metrics.get(cond.metric)
    if value is None:
        return False
    if cond.op == "=":
        if cond.metric in INTEGER_METRICS:
            return value == cond.threshold
        return abs(value - cond.threshold) <= EQ_TOL
    return _OPS[cond.op](value, cond.threshold)


def metrics_used(cond: Condition) -> set[str]:
    if isinstance(cond, Atom):
        return {cond.metric}
    return set().union(*(metrics_used(c) for c in cond.clauses))
