"""COCA-ADL: the XML architecture description and the graph built from it.

Document shape (version 1)::

    <coca-adl version="1">
      <components>
        <component id="LocationManager" kind="context-oriented">
          <protocol><selector name="locate" required="true"/></protocol>
          <static><selector name="updateInterval"/></static>
          <observes entity="BatteryLevel"/>
          <layer id="gps" policy="batteryHigh" style="exclusive:location">
            <handles selector="locate"/>
          </layer>
        </component>
      </components>
      <connectors>
        <connector id="lm" from="LocationManager" to="MapView" type="delegate"/>
      </connectors>
      <configuration>
        <activate component="LocationManager" layer="gps"/>
        <property name="maxComponents" type="number" value="4"/>
      </configuration>
      <policies>
        <policy id="batteryHigh" suit="power">
          <external name="battery" entity="BatteryLevel"/>
          <rule trigger="BatteryLevelDidChange">
            <condition>battery &gt;= 70</condition>
            <action><activate component="LocationManager" layer="gps"/></action>
            <else><evaluate policy="batteryLow"/></else>
          </rule>
        </policy>
      </policies>
    </coca-adl>

Unknown elements or attributes are rejected.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Optional, Tuple

from . import expr as ex
from .actions import (ActivateLayer, DeactivateLayer, EvaluatePolicy,
                      InvokeSelector, LoadComponent, RebindDelegate,
                      ReplaceComponent, SetInternal)
from .errors import (DanglingReference, DeclarationMismatch, DuplicateId,
                     ExpressionSyntaxError, InvalidPolicy, MalformedXML,
                     MissingFactory, SchemaViolation)
from .kernel import (CocaComponent, ComponentGraph, FactoryRegistry, Handler,
                     Kind, Layer)
from .literals import (PROPERTY_NAME, TYPES, format_typed, is_identifier,
                       parse_typed, type_of)
from .policy import DecisionPolicy, Goal, PolicyRepository, Rule, validate_policy

VERSION = 1
CONNECTOR_TYPES = ("delegate", "message", "adaptor")
KINDS = (Kind.BASE.value, Kind.CONTEXT_ORIENTED.value)


@dataclass(frozen=True)
class SelectorDecl:
    name: str
    required: bool = True


@dataclass(frozen=True)
class LayerDecl:
    id: str
    selectors: Tuple[str, ...] = ()
    policy: Optional[str] = None
    style: Optional[str] = None


@dataclass(frozen=True)
class ComponentDecl:
    id: str
    kind: str = "context-oriented"
    protocol: Tuple[SelectorDecl, ...] = ()
    static: Tuple[str, ...] = ()
    layers: Tuple[LayerDecl, ...] = ()
    observes: Tuple[str, ...] = ()

    def selectors(self) -> set:
        out = set(self.static)
        for layer in self.layers:
            out.update(layer.selectors)
        return out


@dataclass(frozen=True)
class ConnectorDecl:
    id: str
    source: str
    target: str
    type: str = "delegate"


@dataclass(frozen=True)
class ConfigDecl:
    activations: Tuple[Tuple[str, str], ...] = ()
    properties: Tuple[Tuple[str, object], ...] = ()


@dataclass(frozen=True)
class ADLDocument:
    components: Tuple[ComponentDecl, ...] = ()
    connectors: Tuple[ConnectorDecl, ...] = ()
    configuration: ConfigDecl = ConfigDecl()
    policies: Tuple[DecisionPolicy, ...] = ()
    version: int = VERSION

    def component(self, component_id: str) -> ComponentDecl:
        for c in self.components:
            if c.id == component_id:
                return c
        raise KeyError(component_id)


# -- validation ---------------------------------------------------------------

def _unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateId(f"duplicate {what} id {i!r}")
        seen.add(i)


def _ident(name, what):
    if not is_identifier(name):
        raise SchemaViolation(f"{what} {name!r} is not a valid identifier")


def _xml_safe(text: str) -> bool:
    return all(ch in "\t\n\r" or 0x20 <= ord(ch) <= 0xD7FF or 0xE000 <= ord(ch) <= 0xFFFD
               or 0x10000 <= ord(ch) <= 0x10FFFF for ch in text)


def validate_document(doc: ADLDocument) -> None:
    """Check every document invariant; raise the matching ADLError."""
    if doc.version != VERSION:
        raise SchemaViolation(f"unsupported version {doc.version!r}")
    _unique([c.id for c in doc.components], "component")
    _unique([c.id for c in doc.connectors], "connector")
    _unique([p.id for p in doc.policies], "policy")
    policy_ids = {p.id for p in doc.policies}
    comps = {c.id: c for c in doc.components}

    for c in doc.components:
        _ident(c.id, "component id")
        if c.kind not in KINDS:
            raise SchemaViolation(f"{c.id}: unknown kind {c.kind!r}")
        if c.kind == Kind.BASE.value and (c.layers or c.observes):
            raise SchemaViolation(f"{c.id}: base components have no layers or observes")
        _unique([s.name for s in c.protocol], f"{c.id} protocol selector")
        _unique(c.static, f"{c.id} static selector")
        _unique([layer.id for layer in c.layers], f"{c.id} layer")
        for s in c.protocol:
            _ident(s.name, "selector")
        for s in c.static:
            _ident(s, "selector")
        for entity in c.observes:
            _ident(entity, "observed entity")
        _unique(c.observes, f"{c.id} observed entity")
        for layer in c.layers:
            _ident(layer.id, "layer id")
            _unique(layer.selectors, f"{c.id}.{layer.id} selector")
            for s in layer.selectors:
                _ident(s, "selector")
            if layer.policy is not None and layer.policy not in policy_ids:
                raise DanglingReference(
                    f"layer {c.id}.{layer.id} references undeclared policy {layer.policy!r}")
            if layer.style is not None and (not layer.style or any(ch.isspace() for ch in layer.style)):
                raise SchemaViolation(f"layer {c.id}.{layer.id}: bad style {layer.style!r}")

    delegating = set()
    for conn in doc.connectors:
        _ident(conn.id, "connector id")
        if conn.type not in CONNECTOR_TYPES:
            raise SchemaViolation(f"connector {conn.id}: unknown type {conn.type!r}")
        for end in (conn.source, conn.target):
            if end not in comps:
                raise DanglingReference(f"connector {conn.id} names undeclared component {end!r}")
        if conn.type == "delegate":
            if conn.source == conn.target:
                raise SchemaViolation(f"connector {conn.id}: a component cannot delegate to itself")
            if conn.source in delegating:
                raise SchemaViolation(f"{conn.source} has more than one delegate")
            delegating.add(conn.source)

    cfg = doc.configuration
    _unique([f"{c}.{l}" for c, l in cfg.activations], "activation")
    groups = {}
    for cid, lid in cfg.activations:
        if cid not in comps or lid not in {layer.id for layer in comps[cid].layers}:
            raise DanglingReference(f"initial activation names unknown layer {cid}.{lid}")
        style = next(layer.style for layer in comps[cid].layers if layer.id == lid)
        if style and style.startswith("exclusive:"):
            key = (cid, style)
            if key in groups:
                raise SchemaViolation(
                    f"{cid}: {groups[key]} and {lid} share exclusive group {style}")
            groups[key] = lid
    _unique([name for name, _ in cfg.properties], "property")
    for name, value in cfg.properties:
        if not PROPERTY_NAME.match(name):
            raise SchemaViolation(f"bad property name {name!r}")
        try:
            kind = type_of(value)
        except TypeError:
            raise SchemaViolation(f"property {name} has unsupported value {value!r}") from None
        if kind == "string" and not _xml_safe(value):
            raise SchemaViolation(f"property {name} holds characters XML cannot carry")

    for p in doc.policies:
        try:
            validate_policy(p)
        except InvalidPolicy as err:
            raise SchemaViolation(str(err)) from None
        for rule in p.rules:
            for action in rule.action + rule.else_action:
                if isinstance(action, EvaluatePolicy) and action.policy not in policy_ids:
                    raise DanglingReference(
                        f"policy {p.id} chains to undeclared policy {action.policy!r}")
                for arg in getattr(action, "args", ()):
                    if isinstance(arg, str) and not _xml_safe(arg):
                        raise SchemaViolation(f"policy {p.id}: argument not representable")
            for cmp in ex.comparisons(rule.condition):
                if isinstance(cmp.literal, str) and not _xml_safe(cmp.literal):
                    raise SchemaViolation(f"policy {p.id}: literal not representable")
        for name, (kind, value) in p.internals.items():
            if kind == "string" and not _xml_safe(value):
                raise SchemaViolation(f"policy {p.id}: {name} not representable")


# -- parsing ------------------------------------------------------------------

def _attrs(el, required=(), optional=()):
    allowed = set(required) | set(optional)
    extra = set(el.attrib) - allowed
    if extra:
        raise SchemaViolation(f"<{el.tag}> has unknown attribute(s) {sorted(extra)}")
    missing = [a for a in required if a not in el.attrib]
    if missing:
        raise SchemaViolation(f"<{el.tag}> is missing attribute(s) {missing}")
    if el.text and el.text.strip():
        raise SchemaViolation(f"<{el.tag}> must not contain text")
    for child in el:
        if child.tail and child.tail.strip():
            raise SchemaViolation(f"stray text after <{child.tag}>")
    return [el.attrib.get(a) for a in required] + [el.attrib.get(a) for a in optional]


def _children(el, *allowed):
    for child in el:
        if child.tag not in allowed:
            raise SchemaViolation(f"unexpected <{child.tag}> inside <{el.tag}>")
    return list(el)


def _bool(text, where):
    if text not in ("true", "false"):
        raise SchemaViolation(f"{where}: expected true/false, got {text!r}")
    return text == "true"


def _typed(el, where):
    kind, value = el.attrib.get("type"), el.attrib.get("value")
    if kind not in TYPES:
        raise SchemaViolation(f"{where}: unknown literal type {kind!r}")
    try:
        return parse_typed(value, kind)
    except ValueError as err:
        raise SchemaViolation(f"{where}: {err}") from None


def _parse_component(el) -> ComponentDecl:
    cid, kind = _attrs(el, ("id", "kind"))
    protocol, static, layers, observes = [], [], [], []
    for child in _children(el, "protocol", "static", "layer", "observes"):
        if child.tag == "protocol":
            _attrs(child)
            for s in _children(child, "selector"):
                name, required = _attrs(s, ("name",), ("required",))
                protocol.append(SelectorDecl(name, _bool(required or "true", f"{cid} protocol")))
        elif child.tag == "static":
            _attrs(child)
            for s in _children(child, "selector"):
                (name,) = _attrs(s, ("name",))
                static.append(name)
        elif child.tag == "observes":
            (entity,) = _attrs(child, ("entity",))
            observes.append(entity)
        else:
            lid, policy, style = _attrs(child, ("id",), ("policy", "style"))
            handled = []
            for h in _children(child, "handles"):
                (name,) = _attrs(h, ("selector",))
                handled.append(name)
            layers.append(LayerDecl(lid, tuple(handled), policy, style))
    return ComponentDecl(cid, kind, tuple(protocol), tuple(static), tuple(layers), tuple(observes))


_ACTION_ATTRS = {
    "activate": ("component", "layer"),
    "deactivate": ("component", "layer"),
    "load": ("component",),
    "replace": ("old", "new"),
    "rebind": ("component", "target"),
    "invoke": ("component", "selector"),
    "set": ("name", "type", "value"),
    "evaluate": ("policy",),
}


def _parse_action(el):
    if el.tag not in _ACTION_ATTRS:
        raise SchemaViolation(f"unknown action <{el.tag}>")
    values = _attrs(el, _ACTION_ATTRS[el.tag])
    if el.tag == "activate":
        return ActivateLayer(*values)
    if el.tag == "deactivate":
        return DeactivateLayer(*values)
    if el.tag == "load":
        return LoadComponent(*values)
    if el.tag == "replace":
        return ReplaceComponent(*values)
    if el.tag == "rebind":
        return RebindDelegate(*values)
    if el.tag == "set":
        return SetInternal(values[0], _typed(el, f"set {values[0]}"))
    if el.tag == "evaluate":
        return EvaluatePolicy(*values)
    args = []
    for arg in _children(el, "arg"):
        _attrs(arg, ("type", "value"))
        args.append(_typed(arg, "invoke argument"))
    return InvokeSelector(values[0], values[1], tuple(args))


def _parse_actions(el):
    _attrs(el)
    return tuple(_parse_action(child) for child in el)


def _parse_policy(el) -> DecisionPolicy:
    pid, suit, style = _attrs(el, ("id",), ("suit", "style"))
    internals, externals, rules, goals = {}, {}, [], []
    for child in _children(el, "internal", "external", "rule", "goal"):
        if child.tag == "internal":
            name, kind, _ = _attrs(child, ("name", "type", "value"))
            if name in internals or name in externals:
                raise DuplicateId(f"policy {pid}: variable {name!r} declared twice")
            internals[name] = (kind, _typed(child, f"{pid}.{name}"))
        elif child.tag == "external":
            name, entity = _attrs(child, ("name", "entity"))
            if name in internals or name in externals:
                raise DuplicateId(f"policy {pid}: variable {name!r} declared twice")
            externals[name] = entity
        elif child.tag == "goal":
            prop, op, _, _ = _attrs(child, ("property", "op", "type", "value"))
            goals.append(Goal(prop, op, _typed(child, f"{pid} goal {prop}")))
        else:
            (trigger,) = _attrs(child, (), ("trigger",))
            parts = _children(child, "condition", "action", "else")
            tags = [p.tag for p in parts]
            if tags.count("condition") != 1 or tags.count("action") > 1 or tags.count("else") > 1:
                raise SchemaViolation(f"policy {pid}: rule needs one <condition>, "
                                      "at most one <action> and one <else>")
            cond_el = next(p for p in parts if p.tag == "condition")
            if cond_el.attrib or len(cond_el):
                raise SchemaViolation(f"policy {pid}: <condition> holds text only")
            try:
                condition = ex.parse(cond_el.text or "")
            except ExpressionSyntaxError as err:
                raise SchemaViolation(f"policy {pid}: {err}") from None
            action = else_action = ()
            for p in parts:
                if p.tag == "action":
                    action = _parse_actions(p)
                elif p.tag == "else":
                    else_action = _parse_actions(p)
            rules.append(Rule(condition, action, else_action, trigger))
    return DecisionPolicy(pid, tuple(rules), suit or "", internals, externals,
                          tuple(goals), style)


def parse_adl(text) -> ADLDocument:
    """Parse and fully validate a COCA-ADL document."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        root = ET.fromstring(text)
    except ET.ParseError as err:
        raise MalformedXML(str(err)) from None
    if root.tag != "coca-adl":
        raise SchemaViolation(f"root element must be <coca-adl>, got <{root.tag}>")
    (version,) = _attrs(root, ("version",))
    if not version.isdigit():
        raise SchemaViolation(f"bad version {version!r}")
    sections = {}
    for child in _children(root, "components", "connectors", "configuration", "policies"):
        if child.tag in sections:
            raise SchemaViolation(f"<{child.tag}> appears twice")
        sections[child.tag] = child

    components, connectors, activations, properties, policies = [], [], [], [], []
    if "components" in sections:
        _attrs(sections["components"])
        components = [_parse_component(c) for c in _children(sections["components"], "component")]
    if "connectors" in sections:
        _attrs(sections["connectors"])
        for c in _children(sections["connectors"], "connector"):
            connectors.append(ConnectorDecl(*_attrs(c, ("id", "from", "to", "type"))))
    if "configuration" in sections:
        _attrs(sections["configuration"])
        for c in _children(sections["configuration"], "activate", "property"):
            if c.tag == "activate":
                activations.append(tuple(_attrs(c, ("component", "layer"))))
            else:
                (name,) = _attrs(c, ("name", "type", "value"))[:1]
                properties.append((name, _typed(c, f"property {name}")))
    if "policies" in sections:
        _attrs(sections["policies"])
        policies = [_parse_policy(p) for p in _children(sections["policies"], "policy")]

    doc = ADLDocument(tuple(components), tuple(connectors),
                      ConfigDecl(tuple(activations), tuple(properties)),
                      tuple(policies), int(version))
    validate_document(doc)
    return doc


def load_adl(path) -> ADLDocument:
    with open(path, "rb") as fh:
        return parse_adl(fh.read())


# -- serialization ------------------------------------------------------------

def _sub(parent, tag, **attrs):
    return ET.SubElement(parent, tag, {k: v for k, v in attrs.items() if v is not None})


def _typed_attrs(value) -> dict:
    return {"type": type_of(value), "value": format_typed(value)}


def _emit_action(parent, action):
    if isinstance(action, ActivateLayer):
        _sub(parent, "activate", component=action.component, layer=action.layer)
    elif isinstance(action, DeactivateLayer):
        _sub(parent, "deactivate", component=action.component, layer=action.layer)
    elif isinstance(action, LoadComponent):
        _sub(parent, "load", component=action.component)
    elif isinstance(action, ReplaceComponent):
        _sub(parent, "replace", old=action.old, new=action.new)
    elif isinstance(action, RebindDelegate):
        _sub(parent, "rebind", component=action.component, target=action.target)
    elif isinstance(action, SetInternal):
        _sub(parent, "set", name=action.name, **_typed_attrs(action.value))
    elif isinstance(action, EvaluatePolicy):
        _sub(parent, "evaluate", policy=action.policy)
    elif isinstance(action, InvokeSelector):
        el = _sub(parent, "invoke", component=action.component, selector=action.selector)
        for arg in action.args:
            _sub(el, "arg", **_typed_attrs(arg))
    else:
        raise TypeError(f"cannot serialize {action!r}")


def serialize_adl(doc: ADLDocument) -> str:
    root = ET.Element("coca-adl", version=str(doc.version))
    comps = _sub(root, "components")
    for c in doc.components:
        el = _sub(comps, "component", id=c.id, kind=c.kind)
        if c.protocol:
            proto = _sub(el, "protocol")
            for s in c.protocol:
                _sub(proto, "selector", name=s.name, required="true" if s.required else "false")
        if c.static:
            static = _sub(el, "static")
            for s in c.static:
                _sub(static, "selector", name=s)
        for entity in c.observes:
            _sub(el, "observes", entity=entity)
        for layer in c.layers:
            lel = _sub(el, "layer", id=layer.id, policy=layer.policy, style=layer.style)
            for s in layer.selectors:
                _sub(lel, "handles", selector=s)
    conns = _sub(root, "connectors")
    for c in doc.connectors:
        _sub(conns, "connector", **{"id": c.id, "from": c.source, "to": c.target, "type": c.type})
    cfg = _sub(root, "configuration")
    for cid, lid in doc.configuration.activations:
        _sub(cfg, "activate", component=cid, layer=lid)
    for name, value in doc.configuration.properties:
        _sub(cfg, "property", name=name, **_typed_attrs(value))
    pols = _sub(root, "policies")
    for p in doc.policies:
        pel = _sub(pols, "policy", id=p.id, suit=p.suit or None, style=p.style)
        for name, (kind, value) in p.internals.items():
            _sub(pel, "internal", name=name, type=kind, value=format_typed(value))
        for name, entity in p.externals.items():
            _sub(pel, "external", name=name, entity=entity)
        for rule in p.rules:
            rel = _sub(pel, "rule", trigger=rule.trigger)
            _sub(rel, "condition").text = ex.to_text(rule.condition)
            if rule.action:
                act = _sub(rel, "action")
                for a in rule.action:
                    _emit_action(act, a)
            if rule.else_action:
                act = _sub(rel, "else")
                for a in rule.else_action:
                    _emit_action(act, a)
        for goal in p.goals:
            _sub(pel, "goal", property=goal.property, op=goal.op, **_typed_attrs(goal.limit))
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


# -- graph construction -------------------------------------------------------

def _stub_handler(selector):
    return Handler(lambda state, msg: None)


def stub_component(decl: ComponentDecl) -> CocaComponent:
    """Instance whose handlers do nothing, built purely from a declaration."""
    return CocaComponent(
        id=decl.id, kind=Kind(decl.kind),
        static={s: _stub_handler(s) for s in decl.static},
        layers=[Layer(layer.id, {s: _stub_handler(s) for s in layer.selectors})
                for layer in decl.layers])


def stub_factories(doc: ADLDocument) -> FactoryRegistry:
    return FactoryRegistry({c.id: (lambda c=c: stub_component(c)) for c in doc.components})


def _conform(instance: CocaComponent, decl: ComponentDecl) -> CocaComponent:
    if instance.kind.value != decl.kind:
        raise DeclarationMismatch(f"{decl.id}: factory built a {instance.kind.value} component")
    if set(instance.static) != set(decl.static):
        raise DeclarationMismatch(
            f"{decl.id}: static selectors {sorted(instance.static)} != {sorted(decl.static)}")
    if [layer.id for layer in instance.layers] != [layer.id for layer in decl.layers]:
        raise DeclarationMismatch(f"{decl.id}: layers differ from declaration")
    for layer, ldecl in zip(instance.layers, decl.layers):
        if set(layer.handlers) != set(ldecl.selectors):
            raise DeclarationMismatch(f"{decl.id}.{layer.id}: handled selectors differ")
        layer.policy_id = ldecl.policy
        layer.style = ldecl.style
        layer.active = False
    instance.protocol = {s.name: s.required for s in decl.protocol}
    instance.observes = tuple(decl.observes)
    instance.delegate = None
    return instance


def attached_policies(component: CocaComponent) -> list:
    out = []
    for layer in component.layers:
        if layer.policy_id and layer.policy_id not in out:
            out.append(layer.policy_id)
    return out


def build_graph(doc: ADLDocument, factories: FactoryRegistry,
                policies: Optional[PolicyRepository] = None) -> ComponentGraph:
    """Instantiate every declared component and wire the runtime graph.

    Base components without a factory are built from their declaration;
    context-oriented ones need a registered factory.
    """
    repo = policies if policies is not None else PolicyRepository()
    for p in doc.policies:
        repo.add_policy(p)

    nodes = {}
    for decl in doc.components:
        if decl.id in factories:
            instance = factories.instantiate(decl.id)
        elif decl.kind == Kind.BASE.value:
            instance = stub_component(decl)
        else:
            raise MissingFactory(f"no factory registered for {decl.id!r}")
        nodes[decl.id] = _conform(instance, decl)

    for conn in doc.connectors:
        if conn.type == "delegate":
            nodes[conn.source].delegate = conn.target
    for cid, lid in doc.configuration.activations:
        nodes[cid].layer(lid).active = True

    graph = ComponentGraph(nodes=nodes, edges=list(doc.connectors),
                           config=doc.configuration, policies=repo)
    graph.attachments = {cid: attached_policies(c) for cid, c in nodes.items()}
    return graph
