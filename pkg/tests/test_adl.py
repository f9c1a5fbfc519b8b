import random

import pytest
from hypothesis import given, settings, strategies as st

from cosm.adl import (ADLDocument, ComponentDecl, ConfigDecl, ConnectorDecl, LayerDecl,
                      build_graph, parse_adl, serialize_adl, stub_factories,
                      validate_document)
from cosm.ecampus import build_fixture, fixture_text
from cosm.errors import (DanglingReference, DeclarationMismatch, DuplicateId, MalformedXML,
                         MissingFactory, SchemaViolation)
from cosm.kernel import CocaComponent, FactoryRegistry, Handler, Kind, Layer

from generators import random_document

MINIMAL = '<coca-adl version="1"><components><component id="Map" kind="base"/></components></coca-adl>'


def wrap(components="", connectors="", configuration="", policies=""):
    return (f'<coca-adl version="1"><components>{components}</components>'
            f'<connectors>{connectors}</connectors><configuration>{configuration}</configuration>'
            f'<policies>{policies}</policies></coca-adl>')


def test_minimal_document():
    doc = parse_adl(MINIMAL)
    assert len(doc.components) == 1
    assert doc.components[0].kind == "base"
    assert doc.connectors == () and doc.policies == ()


def test_dangling_policy_reference():
    text = wrap('<component id="LM" kind="context-oriented">'
                '<layer id="gps" policy="p9"><handles selector="locate"/></layer></component>')
    with pytest.raises(DanglingReference):
        parse_adl(text)


@pytest.mark.parametrize("text,error", [
    ("<coca-adl version='1'><components>", MalformedXML),
    ("<adl version='1'/>", SchemaViolation),
    (wrap('<component id="A" kind="base" colour="red"/>'), SchemaViolation),
    (wrap('<component id="A" kind="base"><gizmo/></component>'), SchemaViolation),
    (wrap('<component id="A" kind="weird"/>'), SchemaViolation),
    (wrap('<component id="A" kind="base"/><component id="A" kind="base"/>'), DuplicateId),
    (wrap('<component id="A" kind="base"><observes entity="X"/></component>'), SchemaViolation),
    (wrap('<component id="A" kind="base"/>', '<connector id="c" from="A" to="B" type="delegate"/>'),
     DanglingReference),
    (wrap('<component id="A" kind="base"/>', '<connector id="c" from="A" to="A" type="delegate"/>'),
     SchemaViolation),
    (wrap('<component id="A" kind="context-oriented"><layer id="x"/><layer id="x"/></component>'),
     DuplicateId),
    (wrap('<component id="A" kind="context-oriented"><layer id="x"/></component>', '',
          '<activate component="A" layer="y"/>'), DanglingReference),
    (wrap('<component id="A" kind="base"/>', '', '<property name="n" type="number" value="abc"/>'),
     SchemaViolation),
    (wrap('<component id="1bad" kind="base"/>'), SchemaViolation),
    (wrap('', '', '', '<policy id="p"><rule><condition>x &gt; 1</condition></rule></policy>'),
     SchemaViolation),
    (wrap('', '', '', '<policy id="p"><external name="x" entity="E"/>'
          '<rule><condition>x &gt;</condition></rule></policy>'), SchemaViolation),
    (wrap('', '', '', '<policy id="p"><external name="x" entity="E"/>'
          '<rule><condition>x &gt; 1</condition><else><evaluate policy="q"/></else></rule></policy>'),
     DanglingReference),
    ('<coca-adl version="2"/>', SchemaViolation),
])
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse_adl(text)


def test_exclusive_initial_activations_conflict():
    text = wrap('<component id="A" kind="context-oriented">'
                '<layer id="x" style="exclusive:g"/><layer id="y" style="exclusive:g"/></component>',
                '', '<activate component="A" layer="x"/><activate component="A" layer="y"/>')
    with pytest.raises(SchemaViolation):
        parse_adl(text)


def test_ecampus_fixture_contents():
    doc = parse_adl(fixture_text())
    assert [c.id for c in doc.components] == ["MapView", "LocationManager", "FeatureFilter"]
    lm = doc.component("LocationManager")
    assert [layer.id for layer in lm.layers] == ["gps", "wifi", "cell"]
    assert sum(len(c.layers) for c in doc.components) == 5
    assert parse_adl(serialize_adl(doc)) == doc


def test_empty_document_serializes_with_empty_components():
    text = serialize_adl(ADLDocument())
    assert "<components />" in text
    assert parse_adl(text) == ADLDocument()


def test_reserved_characters_escape():
    doc = ADLDocument(configuration=ConfigDecl(properties=(
        ("label", '<a href="x">&amp;</a>'), ("note", "tab\tnew\nline"))))
    text = serialize_adl(doc)
    assert "&lt;a" in text
    assert parse_adl(text) == doc


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_round_trip_property(seed):
    doc = random_document(random.Random(seed))
    assert parse_adl(serialize_adl(doc)) == doc


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32))
def test_parse_is_deterministic(seed):
    text = serialize_adl(random_document(random.Random(seed))).encode("utf-8")
    assert parse_adl(text) == parse_adl(text)


def _reference_ids(doc):
    """Every identifier a document refers to, by namespace (exhaustive scan)."""
    comps = {c.id for c in doc.components}
    layers = {(c.id, layer.id) for c in doc.components for layer in c.layers}
    policies = {p.id for p in doc.policies}
    refs = [("component", e) for conn in doc.connectors for e in (conn.source, conn.target)]
    refs += [("layer", a) for a in doc.configuration.activations]
    refs += [("policy", layer.policy) for c in doc.components for layer in c.layers if layer.policy]
    known = {"component": comps, "layer": layers, "policy": policies}
    return [(ns, ident) for ns, ident in refs if ident not in known[ns]]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_reference_closure(seed):
    doc = parse_adl(serialize_adl(random_document(random.Random(seed))))
    assert _reference_ids(doc) == []


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_graph_fidelity(seed):
    doc = random_document(random.Random(seed))
    graph = build_graph(doc, stub_factories(doc))
    assert len(graph.nodes) == len(doc.components)
    for decl in doc.components:
        assert set(graph.nodes[decl.id].dispatch_table()) == decl.selectors()
    assert graph.active_layers() == frozenset(doc.configuration.activations)
    again = build_graph(doc, stub_factories(doc))
    assert again.digest() == graph.digest()
    assert again.edges == graph.edges
    assert ({k: v.dispatch_table() for k, v in again.nodes.items()}
            == {k: v.dispatch_table() for k, v in graph.nodes.items()})


def two_component_doc(activate=()):
    return ADLDocument(
        components=(ComponentDecl("Map", "base", static=("render",)),
                    ComponentDecl("LM", "context-oriented", static=("interval",),
                                  layers=(LayerDecl("gps", ("locate",)),
                                          LayerDecl("wifi", ("locate", "scan"))))),
        configuration=ConfigDecl(activations=tuple(activate)))


def test_build_graph_dispatch_table():
    doc = two_component_doc()
    graph = build_graph(doc, stub_factories(doc))
    assert len(graph.nodes) == 2
    assert set(graph.nodes["LM"].dispatch_table()) == {"interval", "locate", "scan"}
    assert graph.nodes["LM"].dispatch_table()["locate"].layer == "gps"


def test_build_graph_initial_activation():
    doc = two_component_doc([("LM", "gps")])
    graph = build_graph(doc, stub_factories(doc))
    assert graph.active_layers() == {("LM", "gps")}


def test_build_graph_base_needs_no_factory_but_co_does():
    doc = two_component_doc()
    with pytest.raises(MissingFactory):
        build_graph(doc, FactoryRegistry())
    doc = ADLDocument(components=(ComponentDecl("Map", "base", static=("render",)),))
    assert "Map" in build_graph(doc, FactoryRegistry()).nodes


def test_build_graph_rejects_nonconforming_factory():
    doc = two_component_doc()
    bogus = FactoryRegistry({"LM": lambda: CocaComponent("LM", Kind.CONTEXT_ORIENTED, static={
        "interval": Handler(lambda s, m: 0)}, layers=[Layer("gps", {"locate": Handler(lambda s, m: 1)})])})
    with pytest.raises(DeclarationMismatch):
        build_graph(doc, bogus)


def test_ecampus_graph(fixture):
    graph = build_graph(fixture.doc, fixture.factories)
    assert list(graph.nodes) == ["MapView", "LocationManager", "FeatureFilter"]
    delegates = [(e.source, e.target) for e in graph.edges if e.type == "delegate"]
    assert delegates == [("LocationManager", "MapView"), ("FeatureFilter", "MapView")]
    assert graph.active_layers() == {("LocationManager", "gps"), ("FeatureFilter", "full")}
    assert graph.attachments == {"MapView": [], "LocationManager": ["batteryHigh"],
                                 "FeatureFilter": ["features"]}
    assert set(graph.policies.ids()) == {"batteryHigh", "batteryLow", "features"}
    assert graph.nodes["LocationManager"].delegate == "MapView"


def test_validate_document_catches_constructed_errors():
    doc = ADLDocument(components=(ComponentDecl("A", "base"),),
                      connectors=(ConnectorDecl("c", "A", "Nope"),))
    with pytest.raises(DanglingReference):
        validate_document(doc)
