"""Assemble a running application from an ADL document."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .adaptation import AdaptationManager
from .adl import ADLDocument, build_graph
from .context import HISTORY_BOUND, ContextRepository, DispatchReport, NotificationCenter
from .kernel import ApplicationSingleton, FactoryRegistry
from .metrics import CostModel


@dataclass
class Runtime:
    app: ApplicationSingleton
    context: ContextRepository
    center: NotificationCenter
    adaptation: AdaptationManager

    def sense(self, entity, value, at: int = 0):
        return self.center.sense(entity, value, at)

    def dispatch(self, limit: Optional[int] = None) -> DispatchReport:
        return self.center.dispatch(self.app, limit)

    def step(self, entity, value, at: int = 0) -> DispatchReport:
        self.sense(entity, value, at)
        return self.dispatch()


def launch(doc: ADLDocument, factories: FactoryRegistry, entities: Mapping,
           cost: Optional[CostModel] = None, history_bound: int = HISTORY_BOUND) -> Runtime:
    """Build the graph, register every ``observes`` binding, attach the managers."""
    graph = build_graph(doc, factories)
    app = ApplicationSingleton(graph, factories, cost)
    context = ContextRepository(entities, history_bound)
    for cid, component in graph.nodes.items():
        for entity in component.observes:
            context.register_observer(cid, entity)
    app.context = context
    manager = AdaptationManager(app)
    return Runtime(app, context, NotificationCenter(context), manager)
