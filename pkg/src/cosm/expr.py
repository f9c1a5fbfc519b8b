"""Boolean condition expressions used by decision-policy rules.

Grammar (lowest precedence first)::

    expr    := and_e ('or' and_e)*
    and_e   := not_e ('and' not_e)*
    not_e   := 'not' not_e | atom
    atom    := '(' expr ')' | 'true' | 'false' | NAME OP literal
    OP      := '<' | '<=' | '==' | '!=' | '>=' | '>'

Binary operators associate to the left. :func:`to_text` emits a fully
parenthesised canonical form so ``parse(to_text(e)) == e`` for every tree.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from .errors import ExpressionSyntaxError, PolicyTypeError
from .literals import (BOOLEAN, NUMBER, Value, format_literal, parse_literal,
                       type_of)

ORDERING = ("<", "<=", ">=", ">")
EQUALITY = ("==", "!=")
COMPARATORS = ORDERING + EQUALITY

_OPS = {
    "<": operator.lt, "<=": operator.le, ">=": operator.ge, ">": operator.gt,
    "==": operator.eq, "!=": operator.ne,
}


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Compare:
    var: str
    op: str
    literal: Value


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


Expr = Union[Const, Compare, And, Or, Not]


def compare(op: str, left, right) -> bool:
    """Apply a comparator with the typing discipline of the language."""
    if op not in _OPS:
        raise PolicyTypeError(f"unknown comparator {op!r}")
    lt, rt = type_of(left), type_of(right)
    if op in ORDERING and (lt != NUMBER or rt != NUMBER):
        raise PolicyTypeError(f"{op} needs numbers, got {left!r} and {right!r}")
    if lt != rt:
        raise PolicyTypeError(f"cannot compare {left!r} with {right!r}")
    return _OPS[op](left, right)


def variables(expr: Expr) -> Iterator[str]:
    if isinstance(expr, Compare):
        yield expr.var
    elif isinstance(expr, (And, Or)):
        yield from variables(expr.left)
        yield from variables(expr.right)
    elif isinstance(expr, Not):
        yield from variables(expr.operand)


def comparisons(expr: Expr) -> Iterator[Compare]:
    if isinstance(expr, Compare):
        yield expr
    elif isinstance(expr, (And, Or)):
        yield from comparisons(expr.left)
        yield from comparisons(expr.right)
    elif isinstance(expr, Not):
        yield from comparisons(expr.operand)


def check_types(expr: Expr, var_types: Mapping[str, str | None]) -> None:
    """Static check. A ``None`` type means "known only at run time"."""
    for cmp in comparisons(expr):
        if cmp.op not in COMPARATORS:
            raise PolicyTypeError(f"unknown comparator {cmp.op!r}")
        if cmp.var not in var_types:
            raise PolicyTypeError(f"undeclared variable {cmp.var!r}")
        lit_type = type_of(cmp.literal)
        if cmp.op in ORDERING and lit_type != NUMBER:
            raise PolicyTypeError(f"{cmp.var} {cmp.op} needs a numeric literal")
        declared = var_types[cmp.var]
        if declared is not None and declared != lit_type:
            raise PolicyTypeError(
                f"{cmp.var} is {declared} but is compared with {lit_type}")


def evaluate(expr: Expr, env: Mapping[str, Value]) -> bool:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Compare):
        if expr.var not in env:
            raise PolicyTypeError(f"variable {expr.var!r} has no value")
        return compare(expr.op, env[expr.var], expr.literal)
    if isinstance(expr, And):
        return evaluate(expr.left, env) and evaluate(expr.right, env)
    if isinstance(expr, Or):
        return evaluate(expr.left, env) or evaluate(expr.right, env)
    if isinstance(expr, Not):
        return not evaluate(expr.operand, env)
    raise TypeError(f"not an expression: {expr!r}")


def to_text(expr: Expr) -> str:
    if isinstance(expr, Const):
        return "true" if expr.value else "false"
    if isinstance(expr, Compare):
        return f"{expr.var} {expr.op} {format_literal(expr.literal)}"
    if isinstance(expr, And):
        return f"({to_text(expr.left)} and {to_text(expr.right)})"
    if isinstance(expr, Or):
        return f"({to_text(expr.left)} or {to_text(expr.right)})"
    if isinstance(expr, Not):
        return f"not {to_text(expr.operand)}"
    raise TypeError(f"not an expression: {expr!r}")


_TOKEN = re.compile(r"""
    \s*(?:
      (?P<num>-?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)
    | (?P<str>"(?:[^"\\]|\\.)*")
    | (?P<op><=|>=|==|!=|<|>)
    | (?P<paren>[()])
    | (?P<name>[A-Za-z][A-Za-z0-9]*)
    )""", re.VERBOSE)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected input at {pos}: {text[pos:]!r}")
        tokens.append((m.lastgroup, m.group(m.lastgroup)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        if tok[0] is None:
            raise ExpressionSyntaxError(f"unexpected end of {self.text!r}")
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        expr = self.expr()
        if self.pos != len(self.tokens):
            raise ExpressionSyntaxError(f"trailing input in {self.text!r}")
        return expr

    def expr(self):
        left = self.and_e()
        while self.peek() == ("name", "or"):
            self.take()
            left = Or(left, self.and_e())
        return left

    def and_e(self):
        left = self.not_e()
        while self.peek() == ("name", "and"):
            self.take()
            left = And(left, self.not_e())
        return left

    def not_e(self):
        if self.peek() == ("name", "not"):
            self.take()
            return Not(self.not_e())
        return self.atom()

    def atom(self):
        kind, text = self.take()
        if kind == "paren" and text == "(":
            inner = self.expr()
            if self.take() != ("paren", ")"):
                raise ExpressionSyntaxError(f"missing ')' in {self.text!r}")
            return inner
        if kind == "name" and text in ("true", "false"):
            return Const(text == "true")
        if kind == "name" and text not in ("and", "or", "not"):
            op_kind, op = self.take()
            if op_kind != "op":
                raise ExpressionSyntaxError(f"expected comparator after {text!r}")
            lit_kind, lit = self.take()
            if lit_kind == "name" and lit in ("true", "false"):
                return Compare(text, op, lit == "true")
            if lit_kind not in ("num", "str"):
                raise ExpressionSyntaxError(f"expected literal after {text} {op}")
            return Compare(text, op, parse_literal(lit))
        raise ExpressionSyntaxError(f"unexpected token {text!r} in {self.text!r}")


def parse(text: str) -> Expr:
    return _Parser(text).parse()
