"""Adaptation actions carried by policy rules and composition plans."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

from .literals import Value


@dataclass(frozen=True)
class ActivateLayer:
    component: str
    layer: str


@dataclass(frozen=True)
class DeactivateLayer:
    component: str
    layer: str


@dataclass(frozen=True)
class LoadComponent:
    component: str


@dataclass(frozen=True)
class ReplaceComponent:
    old: str
    new: str


@dataclass(frozen=True)
class RebindDelegate:
    component: str
    target: str


@dataclass(frozen=True)
class InvokeSelector:
    component: str
    selector: str
    args: Tuple[Value, ...] = ()


# Policy-only actions: consumed during evaluation, never reach a plan.

@dataclass(frozen=True)
class SetInternal:
    name: str
    value: Value


@dataclass(frozen=True)
class EvaluatePolicy:
    policy: str


AdaptationAction = Union[ActivateLayer, DeactivateLayer, LoadComponent,
                         ReplaceComponent, RebindDelegate, InvokeSelector]
PolicyAction = Union[AdaptationAction, SetInternal, EvaluatePolicy]

TOGGLES = (ActivateLayer, DeactivateLayer)
STRUCTURAL = (LoadComponent, ReplaceComponent, RebindDelegate)


def components_named(action) -> tuple[str, ...]:
    """Component ids an action refers to."""
    if isinstance(action, ReplaceComponent):
        return (action.old, action.new)
    if isinstance(action, RebindDelegate):
        return (action.component, action.target)
    if isinstance(action, (SetInternal, EvaluatePolicy)):
        return ()
    return (action.component,)
