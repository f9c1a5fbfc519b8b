"""Typed literal values: numbers, strings and booleans.

Context values, policy variables, configuration properties and scenario
steps all share this small value domain.
"""

from __future__ import annotations

import math
import re
from typing import Union

Value = Union[int, float, str, bool]

NUMBER = "number"
STRING = "string"
BOOLEAN = "boolean"
TYPES = (NUMBER, STRING, BOOLEAN)

IDENTIFIER = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")
PROPERTY_NAME = re.compile(r"[A-Za-z][A-Za-z0-9_-]*\Z")


def is_identifier(name) -> bool:
    return isinstance(name, str) and IDENTIFIER.match(name) is not None


def type_of(value) -> str:
    # bool first: it is a subclass of int
    if isinstance(value, bool):
        return BOOLEAN
    if isinstance(value, (int, float)):
        return NUMBER
    if isinstance(value, str):
        return STRING
    raise TypeError(f"unsupported value {value!r}")


def same_value(a, b) -> bool:
    """Equality that does not conflate ``True`` with ``1``."""
    try:
        return type_of(a) == type_of(b) and a == b
    except TypeError:
        return False


def format_typed(value) -> str:
    """Text form used in XML attributes, where the type travels separately."""
    kind = type_of(value)
    if kind == BOOLEAN:
        return "true" if value else "false"
    if kind == NUMBER:
        return repr(value)
    return value


def parse_typed(text: str, kind: str) -> Value:
    if kind == BOOLEAN:
        if text == "true":
            return True
        if text == "false":
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind == NUMBER:
        return parse_number(text)
    if kind == STRING:
        return text
    raise ValueError(f"unknown literal type {kind!r}")


def parse_number(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite number: {text!r}")
    return value


def format_literal(value) -> str:
    """Self-describing form used inside condition expressions and scenarios."""
    kind = type_of(value)
    if kind == STRING:
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return format_typed(value)


def parse_literal(text: str) -> Value:
    """Inverse of :func:`format_literal`; bare words are read as strings."""
    text = text.strip()
    if text in ("true", "false"):
        return text == "true"
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        return re.sub(r"\\(.)", r"\1", text[1:-1])
    try:
        return parse_number(text)
    except ValueError:
        return text
