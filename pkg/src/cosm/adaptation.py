"""Composition plans: building, minimizing, executing, recovering.

One plan is built per context event. Plans are minimized against the live
graph, so re-applying a state that already holds yields an empty plan, and
empty plans leave no record.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .actions import (ActivateLayer, DeactivateLayer, InvokeSelector,
                      LoadComponent, RebindDelegate, ReplaceComponent,
                      components_named)
from .adl import attached_policies
from .errors import (ActionFailure, ComponentNotFound, CosmError,
                     DoesNotRecognizeSelector, PolicyNotFound,
                     UnresolvableTarget, UnverifiedPlan)
from .kernel import Message, StateDigest, send_message
from .metrics import ADAPTATION, DECISION
from .verification import (VerificationOutcome, resource_gauges, verify_plan,
                           verify_policy)


@dataclass
class CompositionPlan:
    id: int
    actions: tuple
    cause: tuple = ()
    verified: bool = False
    notes: list = field(default_factory=list)


@dataclass(frozen=True)
class AdaptationRecord:
    plan_id: int
    before: StateDigest
    after: StateDigest
    actions: tuple
    steps: int
    work_units: int
    wall_time: float
    cause: tuple = ()


@dataclass(frozen=True)
class Failure:
    plan_id: Optional[int]
    cause: tuple
    reason: str
    outcome: Optional[VerificationOutcome] = None


def _probe(graph, factories, component_id):
    if component_id in graph.nodes:
        return graph.nodes[component_id]
    if factories is not None and component_id in factories:
        return factories.instantiate(component_id)
    return None


def build_composition_plan(graph, results: Iterable, structure_styles: Iterable[str] = (),
                           factories=None, plan_id: int = 0, cause: tuple = ()) -> CompositionPlan:
    """Concatenate action lists and minimize them against ``graph``.

    ``results`` holds evaluation results (anything with ``.actions``) or
    plain action lists. Layer toggles resolve last-writer-wins; activating a
    layer in an exclusive group deactivates its siblings. Raises
    ``UnresolvableTarget`` for components that are neither in the graph
    nor loadable, and for unknown layers.
    """
    actions = []
    for r in results:
        actions.extend(getattr(r, "actions", r))

    notes = []
    for style in structure_styles:
        if style and not style.startswith("exclusive:"):
            notes.append(f"structure style {style!r} has no effect")

    comps = dict(graph.nodes)
    order = list(graph.nodes)
    delegates = {cid: c.delegate for cid, c in comps.items()}
    current = set(graph.active_layers())
    desired = set(current)
    structural, invokes, rebinds = [], [], {}

    def resolve(cid):
        if cid not in comps:
            instance = _probe(graph, factories, cid)
            if instance is None:
                raise UnresolvableTarget(f"component {cid!r} is neither loaded nor loadable")
            return instance
        return comps[cid]

    for action in actions:
        if isinstance(action, LoadComponent):
            if action.component in comps:
                continue
            comps[action.component] = resolve(action.component)
            order.append(action.component)
            delegates[action.component] = None
            structural.append(action)
        elif isinstance(action, ReplaceComponent):
            if action.old not in comps:
                if action.new in comps:
                    continue
                raise UnresolvableTarget(f"cannot replace absent component {action.old!r}")
            if action.new in comps:
                raise UnresolvableTarget(f"replacement {action.new!r} is already loaded")
            comps[action.new] = resolve(action.new)
            del comps[action.old]
            order[order.index(action.old)] = action.new
            delegates[action.new] = delegates.pop(action.old)
            delegates = {c: (action.new if t == action.old else t) for c, t in delegates.items()}
            current = {(c, l) for c, l in current if c != action.old}
            desired = {(c, l) for c, l in desired if c != action.old}
            structural.append(action)
        elif isinstance(action, RebindDelegate):
            resolve(action.component)
            resolve(action.target)
            rebinds.pop(action.component, None)
            rebinds[action.component] = action.target
        elif isinstance(action, InvokeSelector):
            resolve(action.component)
            invokes.append(action)
        elif isinstance(action, (ActivateLayer, DeactivateLayer)):
            component = comps.get(action.component) or resolve(action.component)
            if not component.has_layer(action.layer):
                raise UnresolvableTarget(f"{action.component} has no layer {action.layer!r}")
            key = (action.component, action.layer)
            if isinstance(action, ActivateLayer):
                group = component.layer(action.layer).group
                if group is not None:
                    desired -= {(action.component, l.id) for l in component.layers
                                if l.group == group}
                desired.add(key)
            else:
                desired.discard(key)
        else:
            raise UnresolvableTarget(f"not an adaptation action: {action!r}")

    for cid, target in rebinds.items():
        if delegates.get(cid) != target:
            structural.append(RebindDelegate(cid, target))

    def ordered(keys):
        rank = {cid: i for i, cid in enumerate(order)}
        def key(item):
            cid, lid = item
            component = comps.get(cid)
            layer_rank = [l.id for l in component.layers].index(lid) if component else 0
            return rank.get(cid, len(rank)), layer_rank
        return sorted(keys, key=key)

    toggles = ([DeactivateLayer(c, l) for c, l in ordered(current - desired)]
               + [ActivateLayer(c, l) for c, l in ordered(desired - current)])
    plan_actions = tuple(structural + toggles + invokes)
    return CompositionPlan(plan_id, plan_actions, tuple(cause), False, notes)


def _capture(app):
    nodes = dict(app.graph.nodes)
    layers = {cid: [(l, l.active) for l in c.layers] for cid, c in nodes.items()}
    delegates = {cid: c.delegate for cid, c in nodes.items()}
    regs = set(app.context.registrations) if app.context is not None else None
    return (nodes, layers, delegates, set(app.base_roster), dict(app.graph.attachments),
            list(app.graph.edges), regs, app.metrics.checkpoint())


def _restore(app, saved):
    nodes, layers, delegates, roster, attachments, edges, regs, mark = saved
    app.graph.nodes.clear()
    app.graph.nodes.update(nodes)
    for cid, pairs in layers.items():
        for layer, active in pairs:
            layer.active = active
    for cid, target in delegates.items():
        nodes[cid].delegate = target
    app.base_roster = roster
    app.graph.attachments = attachments
    app.graph.edges = edges
    if regs is not None:
        app.context.registrations = regs
    app.metrics.rollback(mark)


def _install(app, instance):
    missing = [p for p in attached_policies(instance) if p not in app.graph.policies]
    if missing:
        raise ActionFailure(f"{instance.id} attaches unknown policies {missing}")
    app.add_component(instance)
    app.graph.attachments[instance.id] = attached_policies(instance)
    if app.context is not None:
        for entity in instance.observes:
            app.context.register_observer(instance.id, entity)


def _apply(app, action):
    cost, graph = app.cost, app.graph
    if isinstance(action, (ActivateLayer, DeactivateLayer)):
        graph.nodes[action.component].layer(action.layer).active = isinstance(action, ActivateLayer)
        return cost.layer_toggle
    if isinstance(action, LoadComponent):
        _install(app, app.factories.instantiate(action.component))
        return cost.component_load
    if isinstance(action, ReplaceComponent):
        old = graph.nodes[action.old]
        instance = app.factories.instantiate(action.new)
        instance.delegate = old.delegate
        app.remove_component(action.old)
        graph.attachments.pop(action.old, None)
        if app.context is not None:
            app.context.unregister_component(action.old)
        _install(app, instance)
        for c in graph.nodes.values():
            if c.delegate == action.old:
                c.delegate = action.new
        graph.edges = [type(e)(e.id, action.new if e.source == action.old else e.source,
                               action.new if e.target == action.old else e.target, e.type)
                       for e in graph.edges]
        return cost.component_load
    if isinstance(action, RebindDelegate):
        if action.target not in graph.nodes:
            raise ActionFailure(f"delegate target {action.target!r} is not loaded")
        graph.nodes[action.component].delegate = action.target
        return cost.delegate_rebind
    if isinstance(action, InvokeSelector):
        send_message(app, action.component, Message(action.selector, tuple(action.args)),
                     recover=False)
        return 0
    raise ActionFailure(f"unknown action {action!r}")


def execute_plan(app, plan: CompositionPlan) -> AdaptationRecord:
    """Apply a verified plan atomically; on any failure the graph is restored."""
    if not plan.verified:
        raise UnverifiedPlan(f"plan {plan.id} has not been verified")
    before = app.graph.digest()
    saved = _capture(app)
    start = time.perf_counter()
    units = 0
    try:
        for action in plan.actions:
            charge = _apply(app, action)
            app.metrics.charge(ADAPTATION, type(action).__name__, charge)
            units += charge
    except (CosmError, KeyError, ValueError) as err:
        _restore(app, saved)
        raise ActionFailure(f"plan {plan.id} rolled back: {err}") from err
    wall = time.perf_counter() - start
    return AdaptationRecord(plan.id, before, app.graph.digest(), tuple(plan.actions),
                            len(plan.actions), units, wall, tuple(plan.cause))


class AdaptationManager:
    """Turns context notifications into verified, executed composition plans."""

    def __init__(self, app):
        self.app = app
        self.log: list[AdaptationRecord] = []
        self.failures: list[Failure] = []
        self.outcomes: dict[int, VerificationOutcome] = {}
        self.internals: dict = {}     # (policy id, component id) -> internals
        self.chained: dict = {}       # component id -> {policy id: internals}
        self._next_id = 0
        app.adaptation = self
        app.recovery_hook = self.recover_unrecognized

    def next_plan_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def _evaluate(self, components, trigger, cause):
        app = self.app
        ctx = app.context.snapshot() if app.context is not None else {}
        gauges = resource_gauges(app)
        properties = dict(app.graph.config.properties) if app.graph.config else {}
        results, styles, seen = [], [], set()
        for cid in components:
            for pid in app.graph.attachments.get(cid, ()):
                if pid in seen:
                    continue
                seen.add(pid)
                try:
                    outcome, result = verify_policy(
                        app.graph.policies, pid, ctx, self.internals.get((pid, cid)), trigger,
                        gauges=gauges, properties=properties,
                        chained_internals=self.chained.get(cid))
                except PolicyNotFound as err:
                    self.failures.append(Failure(None, cause, str(err)))
                    continue
                if result is not None:
                    app.metrics.charge(DECISION, "policy-rule-eval",
                                       result.rules_evaluated * app.cost.policy_rule_eval)
                if not outcome.verified:
                    self.failures.append(Failure(None, cause, f"policy {pid} not verified", outcome))
                    continue
                self.internals[(pid, cid)] = result.internals
                self.chained.setdefault(cid, {}).update(result.chained)
                results.append(result)
                style = app.graph.policies.get_policy_for_key(pid).style
                if style:
                    styles.append(style)
        return results, styles

    def plan_for(self, components, trigger=None, cause=()) -> Optional[CompositionPlan]:
        results, styles = self._evaluate(components, trigger, cause)
        try:
            return build_composition_plan(self.app.graph, results, styles, self.app.factories,
                                          self.next_plan_id(), cause)
        except (UnresolvableTarget, ComponentNotFound) as err:
            self.failures.append(Failure(None, cause, str(err)))
            return None

    def submit(self, plan: CompositionPlan) -> Optional[AdaptationRecord]:
        """Verify then execute; failures are logged and leave the graph untouched."""
        outcome = verify_plan(self.app, plan)
        self.outcomes[plan.id] = outcome
        if not outcome.verified:
            self.failures.append(Failure(plan.id, plan.cause, "verification failed", outcome))
            return None
        try:
            record = execute_plan(self.app, plan)
        except ActionFailure as err:
            self.failures.append(Failure(plan.id, plan.cause, str(err), outcome))
            return None
        self.log.append(record)
        return record

    def on_context_notification(self, events) -> list:
        records = []
        for event in events:
            observers = []
            if self.app.context is not None:
                observers = [c for c in self.app.context.observers_of(event.entity)
                             if c in self.app.graph.nodes]
            plan = self.plan_for(observers, event.selector, (event.seq,))
            if plan is None or not plan.actions:
                continue
            record = self.submit(plan)
            if record is not None:
                records.append(record)
        return records

    def recover_unrecognized(self, app, target: str, msg: Message):
        """Re-plan around ``target`` and retry the message exactly once."""
        plan = self.plan_for([target], msg.selector)
        if plan is not None and plan.actions:
            self.submit(plan)
        return send_message(app, target, msg, recover=False)
