"""Context-oriented components and message dispatch.

A component has a static (context-independent) part, an ordered list of
layers that can be switched on and off, an optional delegate, and the
protocol it adopts. Messages are resolved in this order:

1. the dispatch-table entry, if it is the static part or an active layer;
2. the delegate, when it adopts the selector in its protocol and conforms;
3. the remaining layers in declaration order, first active handler wins;
4. the recovery hook, then ``DoesNotRecognizeSelector``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Tuple

from .errors import (ComponentNotFound, DoesNotRecognizeSelector, NoSuchMethod,
                     UnknownTarget)
from .metrics import CostModel, MetricsSink


class Kind(str, Enum):
    COMPONENT = "component"          # root of the inheritance tree
    BASE = "base"
    CONTEXT_ORIENTED = "context-oriented"


INHERITANCE = {Kind.COMPONENT: None, Kind.BASE: Kind.COMPONENT,
               Kind.CONTEXT_ORIENTED: Kind.COMPONENT}


@dataclass
class Handler:
    fn: Callable[[dict, "Message"], Any]
    cost_units: int = 1


_EMPTY = object()


@dataclass
class Message:
    selector: str
    args: Tuple[Any, ...] = ()
    return_value: Any = _EMPTY

    @property
    def has_return(self) -> bool:
        return self.return_value is not _EMPTY


@dataclass(frozen=True)
class HandlerRef:
    component: str
    layer: Optional[str] = None     # None: the static part

    @property
    def is_static(self) -> bool:
        return self.layer is None


@dataclass
class Layer:
    id: str
    handlers: Dict[str, Handler] = field(default_factory=dict)
    active: bool = False
    policy_id: Optional[str] = None
    style: Optional[str] = None

    @property
    def group(self) -> Optional[str]:
        """Exclusive group named by an ``exclusive:<group>`` style."""
        if self.style and self.style.startswith("exclusive:"):
            return self.style.split(":", 1)[1]
        return None


@dataclass
class CocaComponent:
    id: str
    kind: Kind = Kind.CONTEXT_ORIENTED
    static: Dict[str, Handler] = field(default_factory=dict)
    layers: List[Layer] = field(default_factory=list)
    delegate: Optional[str] = None
    protocol: Dict[str, bool] = field(default_factory=dict)   # selector -> required
    observes: Tuple[str, ...] = ()
    state: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.kind = Kind(self.kind)
        if self.kind is Kind.BASE and self.layers:
            raise ValueError(f"base component {self.id} cannot have layers")

    def layer(self, layer_id: str) -> Layer:
        for layer in self.layers:
            if layer.id == layer_id:
                return layer
        raise KeyError(f"{self.id} has no layer {layer_id!r}")

    def has_layer(self, layer_id: str) -> bool:
        return any(layer.id == layer_id for layer in self.layers)

    def active_layer_ids(self) -> list:
        return [layer.id for layer in self.layers if layer.active]

    def dispatch_table(self) -> Dict[str, HandlerRef]:
        table = {s: HandlerRef(self.id) for s in self.static}
        for layer in self.layers:
            for s in layer.handlers:
                table.setdefault(s, HandlerRef(self.id, layer.id))
        return table


def responds_to_selector(c: CocaComponent, selector: str, active_only: bool = False,
                         active: Optional[Iterable[str]] = None) -> bool:
    """``active`` overrides which layer ids count as active (for what-if checks)."""
    if selector in c.static:
        return True
    live = set(active) if active is not None else None
    for layer in c.layers:
        if selector not in layer.handlers:
            continue
        if not active_only:
            return True
        if (layer.id in live) if live is not None else layer.active:
            return True
    return False


def conforms_to_protocol(c: CocaComponent, protocol) -> bool:
    """Structural check: every required selector is implemented somewhere."""
    items = protocol.items() if isinstance(protocol, Mapping) else protocol
    return all(responds_to_selector(c, s) for s, required in items if required)


def method_for_selector(c: CocaComponent, selector: str) -> HandlerRef:
    try:
        return c.dispatch_table()[selector]
    except KeyError:
        raise NoSuchMethod(f"{c.id} has no method for {selector!r}") from None


def is_kind_of(c: CocaComponent, kind) -> bool:
    kind = Kind(kind)
    k = c.kind
    while k is not None:
        if k is kind:
            return True
        k = INHERITANCE[k]
    return False


class FactoryRegistry:
    """Maps component ids to zero-argument factories (the loadable bundles)."""

    def __init__(self, factories: Optional[Mapping[str, Callable[[], CocaComponent]]] = None):
        self._factories: Dict[str, Callable[[], CocaComponent]] = dict(factories or {})

    def register(self, component_id: str, factory: Callable[[], CocaComponent]) -> None:
        self._factories[component_id] = factory

    def __contains__(self, component_id) -> bool:
        return component_id in self._factories

    def ids(self) -> list:
        return list(self._factories)

    def instantiate(self, component_id: str) -> CocaComponent:
        try:
            factory = self._factories[component_id]
        except KeyError:
            raise ComponentNotFound(f"no factory for {component_id!r}") from None
        instance = factory()
        if instance.id != component_id:
            raise ValueError(f"factory for {component_id!r} built {instance.id!r}")
        return instance


def instantiate(registry: FactoryRegistry, component_id: str) -> CocaComponent:
    return registry.instantiate(component_id)


@dataclass(frozen=True)
class StateDigest:
    """Architecture state: active layers, component roster, delegate bindings."""
    active: frozenset
    roster: frozenset
    delegates: frozenset = frozenset()

    def to_dict(self) -> dict:
        return {"active": sorted(map(list, self.active)),
                "roster": sorted(self.roster),
                "delegates": sorted(map(list, self.delegates))}

    @property
    def hexdigest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ComponentGraph:
    nodes: Dict[str, CocaComponent]
    edges: list = field(default_factory=list)
    config: Any = None
    policies: Any = None
    attachments: Dict[str, List[str]] = field(default_factory=dict)
    inheritance: Dict[Kind, Optional[Kind]] = field(default_factory=lambda: dict(INHERITANCE))

    def active_layers(self) -> frozenset:
        return frozenset((c.id, layer.id) for c in self.nodes.values()
                         for layer in c.layers if layer.active)

    def digest(self) -> StateDigest:
        return StateDigest(
            active=self.active_layers(),
            roster=frozenset(self.nodes),
            delegates=frozenset((c.id, c.delegate) for c in self.nodes.values()
                                if c.delegate is not None))

    def property(self, name: str, default=None):
        if self.config is None:
            return default
        return dict(self.config.properties).get(name, default)


class ApplicationSingleton:
    """The running application: graph, base roster, metrics and hooks.

    ``context`` and ``adaptation`` are attached by the caller once the
    context repository and the adaptation manager exist.
    """

    def __init__(self, graph: ComponentGraph, factories: Optional[FactoryRegistry] = None,
                 cost: Optional[CostModel] = None, metrics: Optional[MetricsSink] = None):
        self.graph = graph
        self.factories = factories or FactoryRegistry()
        self.cost = cost or CostModel()
        self.metrics = metrics or MetricsSink()
        self.base_roster = {cid for cid, c in graph.nodes.items() if c.kind is Kind.BASE}
        self.context = None
        self.adaptation = None
        self.interceptor: Optional[Callable[[str, Message, Any], Any]] = None
        self.recovery_hook: Optional[Callable[["ApplicationSingleton", str, Message], Any]] = None
        self.gauges: Dict[str, Any] = {}

    def component(self, component_id: str) -> CocaComponent:
        try:
            return self.graph.nodes[component_id]
        except KeyError:
            raise UnknownTarget(f"no component {component_id!r}") from None

    def add_component(self, component: CocaComponent) -> None:
        self.graph.nodes[component.id] = component
        if component.kind is Kind.BASE:
            self.base_roster.add(component.id)

    def remove_component(self, component_id: str) -> CocaComponent:
        self.base_roster.discard(component_id)
        return self.graph.nodes.pop(component_id)


def _delegate_accepts(delegate: CocaComponent, selector: str) -> bool:
    return (selector in delegate.protocol
            and conforms_to_protocol(delegate, delegate.protocol)
            and responds_to_selector(delegate, selector, active_only=True))


def _first_active(c: CocaComponent, selector: str):
    for layer in c.layers:
        if layer.active and selector in layer.handlers:
            return layer.handlers[selector]
    return None


def _resolve(app: ApplicationSingleton, node: CocaComponent, selector: str):
    """Return (owner, handler) following the dispatch order, or None."""
    ref = node.dispatch_table().get(selector)
    if ref is not None:
        if ref.is_static:
            return node, node.static[selector]
        layer = node.layer(ref.layer)
        if layer.active:
            return node, layer.handlers[selector]
    if node.delegate is not None:
        delegate = app.graph.nodes.get(node.delegate)
        if delegate is not None and _delegate_accepts(delegate, selector):
            handler = delegate.static.get(selector) or _first_active(delegate, selector)
            return delegate, handler
    handler = _first_active(node, selector)
    if handler is not None:
        return node, handler
    return None


def send_message(app: ApplicationSingleton, target: str, msg: Message,
                 recover: bool = True) -> Any:
    node = app.component(target)
    resolved = _resolve(app, node, msg.selector)
    if resolved is None:
        app.metrics.count("unrecognized")
        if recover and app.recovery_hook is not None:
            return app.recovery_hook(app, target, msg)
        raise DoesNotRecognizeSelector(target, msg.selector)
    owner, handler = resolved
    app.metrics.count("handler-invocations")
    app.metrics.count("handler-units", handler.cost_units)
    value = handler.fn(owner.state, msg)
    msg.return_value = value
    if app.interceptor is not None:
        value = app.interceptor(target, msg, value)
        msg.return_value = value
    return value
