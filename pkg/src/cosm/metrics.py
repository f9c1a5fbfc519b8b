"""Deterministic work-unit accounting.

Every charge is itemized (event seq, phase, item, units) so that report
totals can be re-derived from the ledger of charges.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple, Optional

MONITORING = "monitoring"
DETECTION = "detection"
DECISION = "decision"
ADAPTATION = "adaptation"
PHASES = (MONITORING, DETECTION, DECISION, ADAPTATION)


@dataclass(frozen=True)
class CostModel:
    notify_delivery: int = 1
    policy_rule_eval: int = 1
    layer_toggle: int = 2
    delegate_rebind: int = 2
    component_load: int = 25
    snapshot_per_entity: int = 1
    joinpoint_eval_base: int = 1
    joinpoint_history_eval: int = 1

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise ValueError(f"cost {f.name} must be a positive integer, got {value!r}")

    @classmethod
    def from_mapping(cls, data: dict) -> "CostModel":
        known = {f.name for f in fields(cls)}
        normalized = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(normalized) - known
        if unknown:
            raise ValueError(f"unknown cost items: {sorted(unknown)}")
        return cls(**normalized)

    @classmethod
    def load(cls, path) -> "CostModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))

    def to_mapping(self) -> dict:
        return {k.replace("_", "-"): v for k, v in asdict(self).items()}


class Charge(NamedTuple):
    seq: Optional[int]
    phase: str
    item: str
    units: int


class MetricsSink:
    """Append-only ledger of work-unit charges plus free-form counters."""

    def __init__(self):
        self.charges: list[Charge] = []
        self.counters: Counter = Counter()
        self.current_seq: Optional[int] = None

    def charge(self, phase: str, item: str, units: int, seq: Optional[int] = None) -> None:
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}")
        if units < 0:
            raise ValueError("charges are nonnegative")
        if units:
            self.charges.append(Charge(self.current_seq if seq is None else seq,
                                       phase, item, units))

    def count(self, name: str, n: int = 1) -> None:
        self.counters[name] += n

    def checkpoint(self) -> tuple:
        return len(self.charges), Counter(self.counters)

    def rollback(self, mark: tuple) -> None:
        n, counters = mark
        del self.charges[n:]
        self.counters = counters

    def total(self) -> int:
        return sum(c.units for c in self.charges)

    def by_phase(self) -> dict:
        out = {phase: 0 for phase in PHASES}
        for c in self.charges:
            out[c.phase] += c.units
        return out

    def by_seq(self) -> dict:
        out = defaultdict(int)
        for c in self.charges:
            out[c.seq] += c.units
        return dict(out)
