"""Checks run before any composition plan touches the running graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from . import expr as ex
from .actions import (ActivateLayer, DeactivateLayer, InvokeSelector,
                      LoadComponent, RebindDelegate, ReplaceComponent)
from .errors import ComponentNotFound, PolicyError, PolicyNotFound
from .kernel import StateDigest, conforms_to_protocol, responds_to_selector
from .policy import evaluate_policy

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    subject: str = ""


@dataclass
class VerificationOutcome:
    diagnostics: list = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return not self.errors

    @property
    def errors(self) -> list:
        return [d for d in self.diagnostics if d.severity == ERROR]

    def error(self, code, message, subject=""):
        self.diagnostics.append(Diagnostic(ERROR, code, message, subject))

    def warn(self, code, message, subject=""):
        self.diagnostics.append(Diagnostic(WARNING, code, message, subject))

    def codes(self) -> list:
        return [d.code for d in self.diagnostics]


@dataclass(frozen=True)
class ConstraintCheck:
    property: str
    op: str
    limit: object
    observed: object

    def holds(self) -> bool:
        return ex.compare(self.op, self.observed, self.limit)


def resource_gauges(app) -> dict:
    """Simulated resource counters; explicit ``app.gauges`` entries win."""
    gauges = {"component-count": len(app.graph.nodes),
              "active-layers": len(app.graph.active_layers())}
    if app.context is not None and "BatteryLevel" in app.context.entities:
        gauges["battery"] = app.context.entities["BatteryLevel"].value
    gauges.update(app.gauges)
    return gauges


def check_goals(goals, gauges: Mapping, properties: Mapping, outcome: VerificationOutcome,
                subject: str = "") -> list:
    checks = []
    for goal in goals:
        if goal.property in gauges:
            observed = gauges[goal.property]
        elif goal.property in properties:
            observed = properties[goal.property]
        else:
            outcome.warn("unobservable-goal", f"nothing reports {goal.property!r}", subject)
            continue
        check = ConstraintCheck(goal.property, goal.op, goal.limit, observed)
        checks.append(check)
        try:
            ok = check.holds()
        except PolicyError as err:
            outcome.error("goal-type-error", str(err), subject)
            continue
        if not ok:
            outcome.error("constraint-breach",
                          f"{goal.property} = {observed!r} violates {goal.op} {goal.limit!r}",
                          subject)
    return checks


def verify_policy(repo, policy_id: str, ctx: Mapping, internals: Optional[Mapping] = None,
                  trigger: Optional[str] = None, *, gauges: Optional[Mapping] = None,
                  properties: Optional[Mapping] = None, chained_internals=None):
    """Evaluate a stored policy and check its goals.

    Returns ``(outcome, result)``; ``result`` is None when evaluation itself
    failed. Raises ``PolicyNotFound`` for unknown ids.
    """
    policy = repo.get_policy_for_key(policy_id)
    outcome = VerificationOutcome()
    try:
        result = evaluate_policy(policy, ctx, internals, trigger, repo=repo,
                                 chained_internals=chained_internals)
    except PolicyNotFound:
        raise
    except PolicyError as err:
        outcome.error("evaluation-error", str(err), policy_id)
        return outcome, None
    check_goals(policy.goals, gauges or {}, properties or {}, outcome, policy_id)
    return outcome, result


class _PostState:
    """What-if view of the graph after a list of actions."""

    def __init__(self, app):
        self.nodes = dict(app.graph.nodes)
        self.active = set(app.graph.active_layers())
        self.delegates = {cid: c.delegate for cid, c in self.nodes.items()}


def verify_plan(app, plan) -> VerificationOutcome:
    """Structurally check every action against the simulated post-plan state."""
    outcome = VerificationOutcome()
    post = _PostState(app)
    invokes = []

    def known(cid, subject):
        if cid not in post.nodes:
            outcome.error("unknown-component", f"{cid!r} is not in the graph", subject)
            return False
        return True

    def probe(cid, subject):
        if cid not in app.factories:
            outcome.error("missing-factory", f"no factory registered for {cid!r}", subject)
            return None
        try:
            return app.factories.instantiate(cid)
        except (ComponentNotFound, ValueError) as err:
            outcome.error("missing-factory", str(err), subject)
            return None

    for index, action in enumerate(plan.actions):
        subject = f"#{index} {type(action).__name__}"
        if isinstance(action, (ActivateLayer, DeactivateLayer)):
            if not known(action.component, subject):
                continue
            if not post.nodes[action.component].has_layer(action.layer):
                outcome.error("dangling-layer",
                              f"{action.component} has no layer {action.layer!r}", subject)
                continue
            key = (action.component, action.layer)
            if isinstance(action, ActivateLayer):
                post.active.add(key)
            else:
                post.active.discard(key)
        elif isinstance(action, LoadComponent):
            if action.component in post.nodes:
                outcome.error("duplicate-component", f"{action.component} is already loaded", subject)
                continue
            instance = probe(action.component, subject)
            if instance is not None:
                post.nodes[instance.id] = instance
                post.delegates[instance.id] = None
        elif isinstance(action, ReplaceComponent):
            if not known(action.old, subject):
                continue
            if action.new in post.nodes:
                outcome.error("duplicate-component", f"{action.new} is already loaded", subject)
                continue
            instance = probe(action.new, subject)
            if instance is None:
                continue
            del post.nodes[action.old]
            post.active = {(c, l) for c, l in post.active if c != action.old}
            post.nodes[instance.id] = instance
            post.delegates[instance.id] = post.delegates.pop(action.old)
            post.delegates = {c: (action.new if t == action.old else t)
                              for c, t in post.delegates.items()}
        elif isinstance(action, RebindDelegate):
            if not (known(action.component, subject) and known(action.target, subject)):
                continue
            if action.component == action.target:
                outcome.error("self-delegate", f"{action.component} cannot delegate to itself", subject)
                continue
            current = post.delegates.get(action.component)
            expected = (post.nodes[current].protocol if current in post.nodes
                        else post.nodes[action.target].protocol)
            if not conforms_to_protocol(post.nodes[action.target], expected):
                outcome.error("nonconforming-delegate",
                              f"{action.target} does not conform to the delegate protocol "
                              f"of {action.component}", subject)
                continue
            post.delegates[action.component] = action.target
        elif isinstance(action, InvokeSelector):
            if known(action.component, subject):
                invokes.append((subject, action))
        else:
            outcome.error("unknown-action", f"cannot verify {action!r}", subject)

    for subject, action in invokes:
        if action.component not in post.nodes:
            outcome.error("unknown-component", f"{action.component!r} is gone after the plan", subject)
            continue
        live = {l for c, l in post.active if c == action.component}
        if not responds_to_selector(post.nodes[action.component], action.selector,
                                    active_only=True, active=live):
            outcome.error("unresponsive-selector",
                          f"{action.component} will not respond to {action.selector!r}", subject)

    for cid, component in post.nodes.items():
        seen = {}
        for layer in component.layers:
            if (cid, layer.id) in post.active and layer.group is not None:
                if layer.group in seen:
                    outcome.error("exclusive-group-violation",
                                  f"{cid}: {seen[layer.group]} and {layer.id} both active "
                                  f"in group {layer.group}", cid)
                seen[layer.group] = layer.id

    limit = app.graph.property("maxComponents")
    if limit is not None and len(post.nodes) > limit:
        outcome.error("constraint-breach",
                      f"{len(post.nodes)} components exceed maxComponents = {limit}")

    plan.verified = outcome.verified
    return outcome


def apply_to_digest(before: StateDigest, actions) -> StateDigest:
    """Pure re-statement of plan semantics over digests."""
    active, roster = set(before.active), set(before.roster)
    delegates = dict(before.delegates)
    for action in actions:
        if isinstance(action, ActivateLayer):
            active.add((action.component, action.layer))
        elif isinstance(action, DeactivateLayer):
            active.discard((action.component, action.layer))
        elif isinstance(action, LoadComponent):
            roster.add(action.component)
        elif isinstance(action, ReplaceComponent):
            roster.discard(action.old)
            roster.add(action.new)
            active = {(c, l) for c, l in active if c != action.old}
            if action.old in delegates:
                delegates[action.new] = delegates.pop(action.old)
            delegates = {c: (action.new if t == action.old else t) for c, t in delegates.items()}
        elif isinstance(action, RebindDelegate):
            delegates[action.component] = action.target
    return StateDigest(frozenset(active), frozenset(roster), frozenset(delegates.items()))


def state_transition_check(record, expected_plan) -> bool:
    actions = getattr(expected_plan, "actions", expected_plan)
    return apply_to_digest(record.before, actions) == record.after
