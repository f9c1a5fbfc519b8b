"""Scenario replay under the middleware pipeline and an aspect-weaving baseline.

Both engines charge the same :class:`CostModel`, so their per-event series
are directly comparable. The baseline snapshots every entity on each change,
keeps the snapshots, and re-evaluates every joinpoint against the whole
history, so its per-event cost grows with the history length.
"""

from __future__ import annotations

import random
import statistics
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .. import expr as ex
from ..context import HISTORY_BOUND
from ..literals import same_value, type_of
from ..metrics import ADAPTATION, DECISION, DETECTION, MONITORING, PHASES, CostModel
from ..runtime import launch
from .scenario import Scenario


@dataclass
class EventCost:
    index: int          # 1-based scenario step
    at: int
    entity: str
    value: object
    phases: dict
    deliveries: int = 0
    unhandled: int = 0
    evaluations: int = 0
    plans: int = 0
    plan_steps: int = 0
    changed: bool = True

    @property
    def units(self) -> int:
        return sum(self.phases.values())


@dataclass
class RunReport:
    mode: str
    series: list = field(default_factory=list)
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    ledger_total: int = 0        # straight sum of the itemized charges
    wall_time: float = 0.0
    stats: dict = field(default_factory=dict)
    runs: int = 1

    @property
    def totals(self) -> dict:
        return {
            "deliveries": sum(e.deliveries for e in self.series),
            "unhandled": sum(e.unhandled for e in self.series),
            "evaluations": sum(e.evaluations for e in self.series),
            "plans": sum(e.plans for e in self.series),
            "plan-steps": sum(e.plan_steps for e in self.series),
            "work-units": sum(e.units for e in self.series),
        }

    @property
    def phases(self) -> dict:
        out = {p: 0 for p in PHASES}
        for e in self.series:
            for p, v in e.phases.items():
                out[p] += v
        return out

    def units(self) -> list:
        return [e.units for e in self.series]


def _phase_delta(before: dict, after: dict) -> dict:
    return {p: after[p] - before[p] for p in PHASES}


def _jittered(scenario: Scenario, rng: Optional[random.Random], jitter_ms: int):
    for step in scenario.steps:
        offset = rng.randint(0, jitter_ms) if rng is not None and jitter_ms else 0
        yield step, step.at + offset


def run_cosm(scenario: Scenario, fixture, cost: Optional[CostModel] = None,
             rng: Optional[random.Random] = None, jitter_ms: int = 0) -> RunReport:
    """sense -> dispatch -> adapt -> verify -> execute, one scenario step at a time."""
    cost = cost or CostModel()
    rt = launch(fixture.doc, fixture.factories, fixture.entities, cost)
    metrics = rt.app.metrics
    report = RunReport("cosm")
    start = time.perf_counter()
    for index, (step, at) in enumerate(_jittered(scenario, rng, jitter_ms), 1):
        phases_before = metrics.by_phase()
        events = rt.sense(step.entity, step.value, at)
        dispatched = rt.dispatch()
        report.series.append(EventCost(
            index, step.at, step.entity, step.value,
            _phase_delta(phases_before, metrics.by_phase()),
            deliveries=dispatched.deliveries, unhandled=dispatched.unhandled,
            evaluations=dispatched.events, plans=len(dispatched.records),
            plan_steps=sum(r.steps for r in dispatched.records), changed=bool(events)))
        report.records.extend(dispatched.records)
    report.wall_time = time.perf_counter() - start
    report.failures = list(rt.adaptation.failures)
    report.ledger_total = metrics.total()
    return report


@dataclass(frozen=True)
class Joinpoint:
    id: str
    selector: str
    pointcut: ex.Expr
    advice: Optional[Callable] = field(default=None, compare=False)


def default_joinpoints(high: int = 70, low: int = 30) -> list:
    """One aspect per adaptive behaviour of the demo, each guarded by a pointcut."""
    p = ex.parse
    return [
        Joinpoint("gpsAspect", "locate", p(f"BatteryLevel >= {high}")),
        Joinpoint("wifiAspect", "locate", p(f"BatteryLevel >= {low} and BatteryLevel < {high}")),
        Joinpoint("cellAspect", "locate", p(f"BatteryLevel < {low}")),
        Joinpoint("sleepAspect", "locate", p("SleepMode == true")),
        Joinpoint("speedAspect", "updateInterval", p("Speed > 10")),
    ]


def run_daop(scenario: Scenario, joinpoints, cost: Optional[CostModel] = None,
             entities: Optional[dict] = None, history_bound: int = HISTORY_BOUND,
             rng: Optional[random.Random] = None, jitter_ms: int = 0) -> RunReport:
    """Per change: snapshot every entity, then evaluate every joinpoint over the history."""
    cost = cost or CostModel()
    values = dict(entities or {})
    for step in scenario.steps:
        values.setdefault(step.entity, step.value)
    var_types = {name: type_of(v) for name, v in values.items()}
    for jp in joinpoints:
        ex.check_types(jp.pointcut, var_types)
    history = deque(maxlen=history_bound)
    report = RunReport("daop")
    start = time.perf_counter()
    for index, (step, at) in enumerate(_jittered(scenario, rng, jitter_ms), 1):
        phases = {p: 0 for p in PHASES}
        entry = EventCost(index, step.at, step.entity, step.value, phases, changed=False)
        report.series.append(entry)
        if same_value(values[step.entity], step.value):
            continue
        entry.changed = True
        values[step.entity] = step.value
        snapshot = dict(values)
        phases[MONITORING] += len(snapshot) * cost.snapshot_per_entity
        history.append((at, snapshot))
        for jp in joinpoints:
            phases[DETECTION] += cost.joinpoint_eval_base + len(history) * cost.joinpoint_history_eval
            entry.evaluations += 1
            if ex.evaluate(jp.pointcut, snapshot):
                entry.deliveries += 1
                if jp.advice is not None:
                    jp.advice(jp, snapshot, list(history))
    report.wall_time = time.perf_counter() - start
    report.ledger_total = sum(e.units for e in report.series)
    return report


@dataclass
class ComparisonReport:
    cosm: RunReport
    daop: RunReport
    daop_slope: float
    cosm_slope: float
    daop_nondecreasing: bool
    daop_strictly_increasing: bool
    cosm_history_independent: bool

    @property
    def daop_exceeds_cosm(self) -> bool:
        return self.daop.totals["work-units"] > self.cosm.totals["work-units"]


def _slope(values) -> float:
    if len(values) < 2:
        return 0.0
    xs = list(range(1, len(values) + 1))
    return statistics.linear_regression(xs, values).slope


def isolated_costs(scenario: Scenario, fixture, cost: Optional[CostModel] = None) -> list:
    """Cost of each step replayed alone on a fresh runtime primed to its pre-state.

    A fresh runtime has no history, so equality with the in-sequence costs
    shows the per-event cost does not depend on what came before.
    """
    cost = cost or CostModel()
    live = launch(fixture.doc, fixture.factories, fixture.entities, cost)
    out = []
    for step in scenario.steps:
        values = live.context.snapshot()
        active = live.app.graph.active_layers()
        fresh = launch(fixture.doc, fixture.factories, values, cost)
        for cid, component in fresh.app.graph.nodes.items():
            for layer in component.layers:
                layer.active = (cid, layer.id) in active
        before = fresh.app.metrics.total()
        fresh.step(step.entity, step.value, step.at)
        out.append(fresh.app.metrics.total() - before)
        live.step(step.entity, step.value, step.at)
    return out


def compare(scenario: Scenario, fixture, joinpoints=None, cost: Optional[CostModel] = None) -> ComparisonReport:
    cost = cost or CostModel()
    if joinpoints is None:
        joinpoints = default_joinpoints(fixture.high, fixture.low)
    cosm = run_cosm(scenario, fixture, cost)
    daop = run_daop(scenario, joinpoints, cost, fixture.entities)
    changed = [e.units for e in daop.series if e.changed]
    return ComparisonReport(
        cosm, daop,
        daop_slope=_slope(changed),
        cosm_slope=_slope(cosm.units()),
        daop_nondecreasing=all(a <= b for a, b in zip(changed, changed[1:])),
        daop_strictly_increasing=all(a < b for a, b in zip(changed, changed[1:])),
        cosm_history_independent=isolated_costs(scenario, fixture, cost) == cosm.units())


STAT_METRICS = ("work-units", "deliveries", "plans", "plan-steps")


def _stats(samples) -> dict:
    return {"mean": statistics.fmean(samples),
            "variance": statistics.pvariance(samples),
            "stddev": statistics.pstdev(samples)}


def run_repeats(scenario: Scenario, mode: str, n: int, seed: Optional[int], fixture,
                cost: Optional[CostModel] = None, joinpoints=None,
                jitter_ms: int = 0) -> dict:
    """Run ``n`` times and attach mean/variance/stddev to the first run's report.

    Seeded jitter moves event timestamps only; work-units depend on event
    content, so their variance stays zero while wall times differ.
    """
    if n < 1:
        raise ValueError("repeat count must be at least 1")
    cost = cost or CostModel()
    modes = ("cosm", "daop") if mode == "both" else (mode,)
    if joinpoints is None:
        joinpoints = default_joinpoints(fixture.high, fixture.low)
    rng = random.Random(seed)
    runs = {m: [] for m in modes}
    for _ in range(n):
        for m in modes:
            if m == "cosm":
                runs[m].append(run_cosm(scenario, fixture, cost, rng, jitter_ms))
            else:
                runs[m].append(run_daop(scenario, joinpoints, cost, fixture.entities,
                                        rng=rng, jitter_ms=jitter_ms))
    out = {}
    for m, reports in runs.items():
        head = reports[0]
        head.runs = n
        head.stats = {metric: _stats([r.totals[metric] for r in reports])
                      for metric in STAT_METRICS}
        head.stats["wall-time"] = _stats([r.wall_time for r in reports])
        head.stats["identical-series"] = all(r.units() == head.units() for r in reports)
        out[m] = head
    return out
