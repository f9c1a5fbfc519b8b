"""Context entities and the notification center that routes their changes.

``sense`` may be called from any thread. ``dispatch`` drains the FIFO queue
on the thread that owns the application.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import DoesNotRecognizeSelector, UnknownEntity
from .kernel import Message, send_message
from .literals import Value, same_value, type_of
from .metrics import DETECTION

HISTORY_BOUND = 64


class Phase(str, Enum):
    WILL = "WillChange"
    DID = "DidChange"


@dataclass(frozen=True)
class ContextEvent:
    entity: str
    phase: Phase
    old: Value
    new: Value
    timestamp: int
    seq: int

    @property
    def selector(self) -> str:
        return f"{self.entity}{self.phase.value}"


class ContextEntity:
    def __init__(self, name: str, value: Value, history_bound: int = HISTORY_BOUND):
        type_of(value)
        self.name = name
        self.value = value
        self.history: deque = deque(maxlen=history_bound)

    def commit(self, value: Value, at: int) -> None:
        self.value = value
        self.history.append((at, value))


class ContextRepository:
    """Committed entity values and the observer registrations."""

    def __init__(self, entities=None, history_bound: int = HISTORY_BOUND):
        self.history_bound = history_bound
        self.entities: dict[str, ContextEntity] = {}
        self.registrations: set[tuple[str, str]] = set()    # (component, entity)
        self._lock = threading.Lock()
        for name, value in (entities or {}).items():
            self.add_entity(name, value)

    def add_entity(self, name: str, value: Value) -> ContextEntity:
        entity = ContextEntity(name, value, self.history_bound)
        self.entities[name] = entity
        return entity

    def entity(self, name: str) -> ContextEntity:
        try:
            return self.entities[name]
        except KeyError:
            raise UnknownEntity(f"no context entity {name!r}") from None

    def register_observer(self, component_id: str, entity: str) -> None:
        self.entity(entity)
        self.registrations.add((component_id, entity))

    def unregister_observer(self, component_id: str, entity: str) -> None:
        self.registrations.discard((component_id, entity))

    def unregister_component(self, component_id: str) -> None:
        self.registrations = {r for r in self.registrations if r[0] != component_id}

    def observers_of(self, entity: str) -> list:
        return sorted(cid for cid, e in self.registrations if e == entity)

    def snapshot(self) -> dict:
        with self._lock:
            return {name: e.value for name, e in self.entities.items()}


@dataclass
class DispatchReport:
    events: int = 0
    deliveries: int = 0
    unhandled: int = 0
    delivered: list = field(default_factory=list)    # (seq, component id)
    processed: list = field(default_factory=list)    # events in processing order
    records: list = field(default_factory=list)      # adaptation records


class NotificationCenter:
    """Multi-producer FIFO of context events plus observer delivery."""

    def __init__(self, repo: ContextRepository):
        self.repo = repo
        self.queue: deque[ContextEvent] = deque()
        self._lock = threading.Lock()
        self._seq = 0

    def __len__(self) -> int:
        return len(self.queue)

    def _enqueue(self, entity, phase, old, new, at) -> ContextEvent:
        self._seq += 1
        event = ContextEvent(entity, phase, old, new, at, self._seq)
        self.queue.append(event)
        return event

    def post(self, entity: str, phase: Phase, old: Value, new: Value, at: int = 0) -> ContextEvent:
        """Enqueue an event without touching committed values."""
        self.repo.entity(entity)
        with self._lock:
            return self._enqueue(entity, Phase(phase), old, new, at)

    def sense(self, entity: str, value: Value, at: int = 0) -> list:
        """Record a sensed value; returns the (will, did) events, or [] if unchanged."""
        ent = self.repo.entity(entity)
        type_of(value)
        with self._lock:
            old = ent.value
            if same_value(old, value):
                return []
            will = self._enqueue(entity, Phase.WILL, old, value, at)
            with self.repo._lock:
                ent.commit(value, at)
            did = self._enqueue(entity, Phase.DID, old, value, at)
            return [will, did]

    def dispatch(self, app, limit: Optional[int] = None) -> DispatchReport:
        """Deliver queued events in FIFO order, then hand each to adaptation."""
        report = DispatchReport()
        cost = app.cost
        while self.queue and (limit is None or report.events < limit):
            with self._lock:
                event = self.queue.popleft()
            app.metrics.current_seq = event.seq
            report.events += 1
            report.processed.append(event)
            for cid in self.repo.observers_of(event.entity):
                if cid not in app.graph.nodes:
                    continue
                msg = Message(event.selector, (event.old, event.new))
                report.deliveries += 1
                report.delivered.append((event.seq, cid))
                app.metrics.charge(DETECTION, "notify-delivery", cost.notify_delivery)
                try:
                    send_message(app, cid, msg, recover=False)
                except DoesNotRecognizeSelector:
                    report.unhandled += 1
            if app.adaptation is not None:
                report.records.extend(app.adaptation.on_context_notification([event]))
        app.metrics.current_seq = None
        return report
