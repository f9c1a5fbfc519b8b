"""Decision policies: rule sets over internal and external variables.

A policy binds *external* variables to context entities and keeps *internal*
variables that evolve across evaluations. Each rule selects its action list
when its condition holds and its else-action list otherwise.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Tuple, Union

from . import expr as ex
from .actions import (ActivateLayer, DeactivateLayer, EvaluatePolicy,
                      InvokeSelector, LoadComponent, PolicyAction,
                      RebindDelegate, ReplaceComponent, SetInternal,
                      components_named)
from .errors import (ChainDepthExceeded, IndexOutOfRange, InvalidPolicy,
                     PolicyNotFound, PolicyTypeError, UnboundExternalVariable)
from .literals import (PROPERTY_NAME, TYPES, Value, is_identifier, type_of)

MAX_CHAIN_DEPTH = 8

ACTION = "action"
ELSE = "else"


@dataclass(frozen=True)
class Rule:
    condition: ex.Expr
    action: Tuple[PolicyAction, ...] = ()
    else_action: Tuple[PolicyAction, ...] = ()
    trigger: Optional[str] = None


@dataclass(frozen=True)
class Goal:
    """A quality or resource constraint, e.g. ``memory-units <= 100``."""
    property: str
    op: str
    limit: Value


@dataclass(frozen=True)
class DecisionPolicy:
    id: str
    rules: Tuple[Rule, ...]
    suit: str = ""
    internals: Dict[str, Tuple[str, Value]] = field(default_factory=dict)
    externals: Dict[str, str] = field(default_factory=dict)
    goals: Tuple[Goal, ...] = ()
    style: Optional[str] = None

    def var_types(self) -> dict:
        types = {name: kind for name, (kind, _) in self.internals.items()}
        types.update({name: None for name in self.externals})
        return types

    def initial_internals(self) -> dict:
        return {name: value for name, (_, value) in self.internals.items()}


def _check_action(policy: DecisionPolicy, action) -> None:
    if isinstance(action, SetInternal):
        if action.name not in policy.internals:
            raise InvalidPolicy(
                f"{policy.id}: set of undeclared internal {action.name!r}")
        kind = policy.internals[action.name][0]
        if type_of(action.value) != kind:
            raise InvalidPolicy(
                f"{policy.id}: {action.name} is {kind}, assigned {action.value!r}")
        return
    if isinstance(action, EvaluatePolicy):
        if not is_identifier(action.policy):
            raise InvalidPolicy(f"{policy.id}: bad policy reference {action.policy!r}")
        return
    if not isinstance(action, (ActivateLayer, DeactivateLayer, LoadComponent,
                               ReplaceComponent, RebindDelegate, InvokeSelector)):
        raise InvalidPolicy(f"{policy.id}: not an action: {action!r}")
    names = list(components_named(action))
    if isinstance(action, (ActivateLayer, DeactivateLayer)):
        names.append(action.layer)
    if isinstance(action, InvokeSelector):
        names.append(action.selector)
        for arg in action.args:
            type_of(arg)
    for name in names:
        if not is_identifier(name):
            raise InvalidPolicy(f"{policy.id}: bad identifier {name!r} in {action!r}")


def validate_policy(policy: DecisionPolicy) -> None:
    """Raise :class:`InvalidPolicy` unless every policy invariant holds."""
    if not is_identifier(policy.id):
        raise InvalidPolicy(f"bad policy id {policy.id!r}")
    overlap = set(policy.internals) & set(policy.externals)
    if overlap:
        raise InvalidPolicy(f"{policy.id}: variables declared twice: {sorted(overlap)}")
    for name, (kind, value) in policy.internals.items():
        if not is_identifier(name):
            raise InvalidPolicy(f"{policy.id}: bad variable name {name!r}")
        if kind not in TYPES:
            raise InvalidPolicy(f"{policy.id}: {name} has unknown type {kind!r}")
        try:
            ok = type_of(value) == kind
        except TypeError:
            ok = False
        if not ok:
            raise InvalidPolicy(f"{policy.id}: {name} initial value {value!r} is not {kind}")
    for name, entity in policy.externals.items():
        if not is_identifier(name) or not is_identifier(entity):
            raise InvalidPolicy(f"{policy.id}: bad external binding {name}->{entity}")
    if not policy.rules:
        raise InvalidPolicy(f"{policy.id}: rule list is empty")
    var_types = policy.var_types()
    for index, rule in enumerate(policy.rules):
        if rule.trigger is not None and not is_identifier(rule.trigger):
            raise InvalidPolicy(f"{policy.id}: rule {index} has bad trigger {rule.trigger!r}")
        try:
            ex.check_types(rule.condition, var_types)
        except PolicyTypeError as err:
            raise InvalidPolicy(f"{policy.id}: rule {index}: {err}") from None
        for action in rule.action + rule.else_action:
            _check_action(policy, action)
    for goal in policy.goals:
        if not PROPERTY_NAME.match(goal.property):
            raise InvalidPolicy(f"{policy.id}: bad goal property {goal.property!r}")
        if goal.op not in ex.COMPARATORS:
            raise InvalidPolicy(f"{policy.id}: bad goal comparator {goal.op!r}")
        if goal.op in ex.ORDERING and type_of(goal.limit) != "number":
            raise InvalidPolicy(f"{policy.id}: goal {goal.property} needs a numeric limit")


@dataclass
class EvaluationResult:
    policy_id: str
    fired: list            # (rule index, branch) for this policy's own rules
    actions: list          # adaptation actions, chained policies spliced in
    internals: dict        # updated internal variables
    chained: dict = field(default_factory=dict)   # policy id -> updated internals
    trace: list = field(default_factory=list)     # (policy id, rule index, branch)
    rules_evaluated: int = 0


def evaluate_policy(policy: DecisionPolicy, ctx: Mapping[str, Value],
                    internals: Optional[Mapping[str, Value]] = None,
                    trigger: Optional[str] = None, *, repo=None,
                    chained_internals: Optional[Mapping[str, Mapping]] = None,
                    max_depth: int = MAX_CHAIN_DEPTH) -> EvaluationResult:
    """Evaluate ``policy`` against a context snapshot.

    Without ``repo``, ``EvaluatePolicy`` actions are returned as-is; with one,
    the chained policy is evaluated in place and its actions spliced in.
    Neither the snapshot nor the passed internals are mutated.
    """
    chained_internals = dict(chained_internals or {})
    result = EvaluationResult(policy.id, [], [], {})
    result.internals = _evaluate(policy, ctx, internals, trigger, repo,
                                 chained_internals, result, 0, max_depth, top=True)
    return result


def _evaluate(policy, ctx, internals, trigger, repo, chained_internals, result,
              depth, max_depth, top):
    env = policy.initial_internals()
    if internals:
        env.update({k: v for k, v in internals.items() if k in policy.internals})
    for name, entity in policy.externals.items():
        if entity not in ctx:
            raise UnboundExternalVariable(
                f"{policy.id}: {name} is bound to {entity!r}, absent from context")
        env[name] = ctx[entity]

    for index, rule in enumerate(policy.rules):
        if rule.trigger is not None and rule.trigger != trigger:
            continue
        result.rules_evaluated += 1
        branch = ACTION if ex.evaluate(rule.condition, env) else ELSE
        if top:
            result.fired.append((index, branch))
        result.trace.append((policy.id, index, branch))
        for action in (rule.action if branch == ACTION else rule.else_action):
            if isinstance(action, SetInternal):
                env[action.name] = action.value
            elif isinstance(action, EvaluatePolicy) and repo is not None:
                if depth + 1 > max_depth:
                    raise ChainDepthExceeded(
                        f"{policy.id}: chaining deeper than {max_depth} hops")
                target = repo.get_policy_for_key(action.policy)
                start = result.chained.get(target.id, chained_internals.get(target.id))
                result.chained[target.id] = _evaluate(
                    target, ctx, start, trigger, repo, chained_internals, result,
                    depth + 1, max_depth, top=False)
            else:
                result.actions.append(action)
    return {name: env[name] for name in policy.internals}


# -- repository ---------------------------------------------------------------

@dataclass(frozen=True)
class SetSuit:
    suit: str


@dataclass(frozen=True)
class SetRule:
    index: int
    rule: Rule


@dataclass(frozen=True)
class SetAction:
    index: int
    actions: Tuple[PolicyAction, ...]


@dataclass(frozen=True)
class SetElseAction:
    index: int
    actions: Tuple[PolicyAction, ...]


Mutation = Union[SetSuit, SetRule, SetAction, SetElseAction]


class PolicyRepository:
    """Associative store of policies keyed by id; each key stored once."""

    def __init__(self, policies=()):
        self._store: Dict[str, DecisionPolicy] = {}
        self._lock = threading.Lock()
        for policy in policies:
            self.add_policy(policy)

    def __contains__(self, policy_id) -> bool:
        return policy_id in self._store

    def __len__(self) -> int:
        return len(self._store)

    def __iter__(self):
        return iter(list(self._store.values()))

    def ids(self) -> list:
        return list(self._store)

    def add_policy(self, policy: DecisionPolicy) -> None:
        validate_policy(policy)
        with self._lock:
            self._store[policy.id] = policy

    def remove_policy(self, policy_id: str) -> None:
        with self._lock:
            self._store.pop(policy_id, None)

    def get_policy_for_key(self, policy_id: str) -> DecisionPolicy:
        try:
            return self._store[policy_id]
        except KeyError:
            raise PolicyNotFound(f"no policy {policy_id!r}") from None

    def update_policy(self, policy_id: str, mutation: Mutation) -> None:
        with self._lock:
            policy = self.get_policy_for_key(policy_id)
            if isinstance(mutation, SetSuit):
                updated = replace(policy, suit=mutation.suit)
            else:
                if not 0 <= mutation.index < len(policy.rules):
                    raise IndexOutOfRange(
                        f"{policy_id}: no rule {mutation.index} "
                        f"(has {len(policy.rules)})")
                rules = list(policy.rules)
                old = rules[mutation.index]
                if isinstance(mutation, SetRule):
                    rules[mutation.index] = mutation.rule
                elif isinstance(mutation, SetAction):
                    rules[mutation.index] = replace(old, action=tuple(mutation.actions))
                elif isinstance(mutation, SetElseAction):
                    rules[mutation.index] = replace(old, else_action=tuple(mutation.actions))
                else:
                    raise TypeError(f"unknown mutation {mutation!r}")
                updated = replace(policy, rules=tuple(rules))
            validate_policy(updated)
            self._store[policy_id] = updated
