"""Context-oriented adaptation middleware with a scenario harness."""

from .adl import ADLDocument, build_graph, parse_adl, serialize_adl
from .context import ContextEvent, ContextRepository, NotificationCenter, Phase
from .kernel import (ApplicationSingleton, CocaComponent, FactoryRegistry,
                     Handler, Layer, Message, send_message)
from .metrics import CostModel, MetricsSink
from .policy import DecisionPolicy, PolicyRepository, Rule, evaluate_policy
from .runtime import Runtime, launch

__version__ = "0.1.0"
