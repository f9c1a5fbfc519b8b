"""Scenario files: timed context changes plus run directives.

::

    # comment
    @repeat 200
    @seed 7
    @mode both
    t=0 BatteryLevel=100
    t=10 BatteryLevel=25
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..errors import ScenarioParseError, UnknownEntity
from ..literals import Value, parse_literal

MODES = ("cosm", "daop", "both")

_STEP = re.compile(r'^t=(\d+)\s+([A-Za-z][A-Za-z0-9]*)=("(?:[^"\\]|\\.)*"|[^\s#"]+)\s*(?:#.*)?$')
_DIRECTIVE = re.compile(r"^@(repeat|seed|mode)\s+(\S+)\s*(?:#.*)?$")


@dataclass(frozen=True)
class ScenarioStep:
    at: int
    entity: str
    value: Value


@dataclass
class Scenario:
    steps: list = field(default_factory=list)
    repeat: int = 1
    seed: Optional[int] = None
    mode: str = "cosm"

    def entities(self) -> set:
        return {s.entity for s in self.steps}


def parse_scenario(text: str, entities: Optional[Iterable[str]] = None) -> Scenario:
    scenario = Scenario()
    steps = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _DIRECTIVE.match(line)
        if m:
            name, arg = m.groups()
            if name == "mode":
                if arg not in MODES:
                    raise ScenarioParseError(f"line {lineno}: unknown mode {arg!r}")
                scenario.mode = arg
            else:
                if not re.fullmatch(r"\d+", arg):
                    raise ScenarioParseError(f"line {lineno}: @{name} needs an integer")
                setattr(scenario, name, int(arg))
            continue
        m = _STEP.match(line)
        if not m:
            raise ScenarioParseError(f"line {lineno}: cannot parse {raw!r}")
        at, entity, literal = m.groups()
        steps.append(ScenarioStep(int(at), entity, parse_literal(literal)))
    if scenario.repeat < 1:
        raise ScenarioParseError("@repeat must be at least 1")
    if entities is not None:
        known = set(entities)
        for step in steps:
            if step.entity not in known:
                raise UnknownEntity(f"scenario step at t={step.at} names unknown entity "
                                    f"{step.entity!r}")
    scenario.steps = sorted(steps, key=lambda s: s.at)
    return scenario


def load_scenario(path, entities: Optional[Iterable[str]] = None) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read(), entities)
