import random

import pytest
from hypothesis import given, settings, strategies as st

from cosm.errors import ComponentNotFound, DoesNotRecognizeSelector, NoSuchMethod, UnknownTarget
from cosm.kernel import (ApplicationSingleton, CocaComponent, ComponentGraph, FactoryRegistry,
                         Handler, HandlerRef, Kind, Layer, Message, conforms_to_protocol,
                         is_kind_of, method_for_selector, responds_to_selector, send_message)


def const(value, units=1):
    return Handler(lambda state, msg: value, units)


def lm(active=("gps",), delegate="Map"):
    return CocaComponent(
        "LM", Kind.CONTEXT_ORIENTED,
        static={"interval": const("static-interval")},
        layers=[Layer("gps", {"locate": const("gps"), "interval": const("gps-interval")},
                      active="gps" in active),
                Layer("wifi", {"locate": const("wifi"), "scan": const("wifi-scan")},
                      active="wifi" in active)],
        delegate=delegate)


def map_view(protocol=None):
    return CocaComponent("Map", Kind.BASE,
                         static={"render": const("map-render"), "zoom": const("map-zoom")},
                         protocol=protocol if protocol is not None else {"render": True})


def app_of(*components):
    return ApplicationSingleton(ComponentGraph({c.id: c for c in components}))


def send(app, target, selector, **kw):
    return send_message(app, target, Message(selector), **kw)


def test_static_wins_over_layer():
    app = app_of(lm(), map_view())
    assert send(app, "LM", "interval") == "static-interval"


def test_first_active_layer_in_declaration_order():
    app = app_of(lm(active=("gps", "wifi")), map_view())
    assert send(app, "LM", "locate") == "gps"
    app.graph.nodes["LM"].layer("gps").active = False
    assert send(app, "LM", "locate") == "wifi"


def test_inactive_table_entry_falls_through_to_later_active_layer():
    app = app_of(lm(active=("wifi",)), map_view())
    assert app.graph.nodes["LM"].dispatch_table()["locate"] == HandlerRef("LM", "gps")
    assert send(app, "LM", "locate") == "wifi"


def test_delegate_forwarding_respects_protocol():
    app = app_of(lm(), map_view())
    assert send(app, "LM", "render") == "map-render"
    with pytest.raises(DoesNotRecognizeSelector):
        send(app, "LM", "zoom")          # Map implements zoom but does not publish it


def test_delegate_must_conform_to_its_own_protocol():
    app = app_of(lm(), map_view({"render": True, "pan": True}))
    with pytest.raises(DoesNotRecognizeSelector):
        send(app, "LM", "render")


def test_delegate_ahead_of_own_active_layers():
    a = CocaComponent("A", layers=[Layer("x", {"ping": const("own")}, active=True)], delegate="B")
    b = CocaComponent("B", Kind.BASE, static={"ping": const("delegate")}, protocol={"ping": True})
    assert send(app_of(a, b), "A", "ping") == "own"   # table entry is active, so it wins
    a.layer("x").active = False
    assert send(app_of(a, b), "A", "ping") == "delegate"


def test_unknown_selector_and_target():
    app = app_of(lm(), map_view())
    with pytest.raises(DoesNotRecognizeSelector) as info:
        send(app, "LM", "teleport")
    assert info.value.target == "LM" and info.value.selector == "teleport"
    with pytest.raises(UnknownTarget):
        send(app, "Ghost", "locate")


def test_recovery_hook_called_then_bypassed():
    app = app_of(lm(), map_view())
    calls = []
    app.recovery_hook = lambda a, target, msg: calls.append((target, msg.selector)) or "recovered"
    assert send(app, "LM", "teleport") == "recovered"
    assert calls == [("LM", "teleport")]
    with pytest.raises(DoesNotRecognizeSelector):
        send(app, "LM", "teleport", recover=False)


def test_interceptor_rewrites_return_value():
    app = app_of(lm(), map_view())
    seen = []

    def intercept(target, msg, value):
        seen.append((target, msg.selector, msg.has_return))
        return value.upper()

    app.interceptor = intercept
    msg = Message("locate")
    assert send_message(app, "LM", msg) == "GPS"
    assert msg.return_value == "GPS"
    assert seen == [("LM", "locate", True)]


def test_handler_gets_state_and_args():
    c = CocaComponent("C", Kind.BASE, static={"add": Handler(lambda s, m: s["n"] + m.args[0])},
                      state={"n": 40})
    assert send_message(app_of(c), "C", Message("add", (2,))) == 42


def test_handler_costs_counted_not_charged():
    app = app_of(lm(), map_view())
    send(app, "LM", "locate")
    assert app.metrics.counters["handler-invocations"] == 1
    assert app.metrics.total() == 0


def test_introspection():
    c = lm(active=())
    assert responds_to_selector(c, "locate")
    assert not responds_to_selector(c, "locate", active_only=True)
    assert responds_to_selector(c, "locate", active_only=True, active={"wifi"})
    assert conforms_to_protocol(c, {"locate": True, "teleport": False})
    assert not conforms_to_protocol(c, {"teleport": True})
    assert method_for_selector(c, "scan") == HandlerRef("LM", "wifi")
    with pytest.raises(NoSuchMethod):
        method_for_selector(c, "teleport")
    assert is_kind_of(c, Kind.COMPONENT) and is_kind_of(c, "context-oriented")
    assert not is_kind_of(map_view(), Kind.CONTEXT_ORIENTED)


def test_base_components_cannot_hold_layers():
    with pytest.raises(ValueError):
        CocaComponent("B", Kind.BASE, layers=[Layer("x")])


def test_factory_registry():
    registry = FactoryRegistry({"Map": map_view})
    assert registry.instantiate("Map").id == "Map"
    assert registry.instantiate("Map") is not registry.instantiate("Map")
    with pytest.raises(ComponentNotFound):
        registry.instantiate("Nope")
    registry.register("Bad", map_view)
    with pytest.raises(ValueError):
        registry.instantiate("Bad")


def test_add_remove_component_tracks_base_roster():
    app = app_of(lm())
    app.add_component(map_view())
    assert app.base_roster == {"Map"}
    app.remove_component("Map")
    assert app.base_roster == set()


def _reference_dispatch(app, target, selector):
    """Direct transcription of the resolution order, used as an oracle."""
    node = app.graph.nodes[target]
    if selector in node.static:
        return node.static[selector]
    for layer in node.layers:
        if selector in layer.handlers:
            if layer.active:
                return layer.handlers[selector]
            break
    if node.delegate in app.graph.nodes:
        d = app.graph.nodes[node.delegate]
        if (selector in d.protocol
                and all(responds_to_selector(d, s) for s, r in d.protocol.items() if r)
                and responds_to_selector(d, selector, active_only=True)):
            if selector in d.static:
                return d.static[selector]
            return next(la.handlers[selector] for la in d.layers
                        if la.active and selector in la.handlers)
    for layer in node.layers:
        if layer.active and selector in layer.handlers:
            return layer.handlers[selector]
    return None


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_dispatch_is_total_and_matches_reference(seed):
    rng = random.Random(seed)
    selectors = ["a", "b", "c", "d", "e"]
    components = []
    for i in range(3):
        tag = f"C{i}"
        static = {s: const(f"{tag}.static.{s}") for s in rng.sample(selectors, rng.randint(0, 2))}
        layers = [Layer(f"L{j}", {s: const(f"{tag}.L{j}.{s}")
                                  for s in rng.sample(selectors, rng.randint(1, 3))},
                        active=rng.random() < 0.5) for j in range(rng.randint(0, 3))]
        protocol = {s: rng.random() < 0.5 for s in rng.sample(selectors, rng.randint(0, 3))}
        components.append(CocaComponent(tag, Kind.CONTEXT_ORIENTED, static, layers,
                                        protocol=protocol))
    for c in components:
        c.delegate = rng.choice([None] + [o.id for o in components if o.id != c.id])
    app = app_of(*components)
    for c in components:
        for s in selectors:
            expected = _reference_dispatch(app, c.id, s)
            if expected is None:
                with pytest.raises(DoesNotRecognizeSelector):
                    send(app, c.id, s)
            else:
                assert send(app, c.id, s) == expected.fn({}, None)
