import pytest
from hypothesis import given, strategies as st

from cosm.ecampus import (ENTITIES, SOURCES, DeviceState, Feature, NoActiveLocationLayer,
                          battery_band, battery_policies, build_fixture, filter_features,
                          load_features, location_fix, proactive_speed_policy)
from cosm.kernel import Message, send_message
from cosm.runtime import launch

LM = "LocationManager"


def feats(*scores):
    return [Feature(f"f{i}", f"n{i}", (i, i), s) for i, s in enumerate(scores)]


def location_layers(rt):
    return rt.app.component(LM).active_layer_ids()


def test_fixture_contents(fixture):
    assert [c.id for c in fixture.doc.components] == ["MapView", LM, "FeatureFilter"]
    assert sum(len(c.layers) for c in fixture.doc.components) == 5
    assert set(fixture.entities) == {"BatteryLevel", "Speed", "SleepMode", "Bandwidth"}
    assert fixture.doc.configuration.activations == ((LM, "gps"), ("FeatureFilter", "full"))
    assert {p.id: p for p in fixture.doc.policies} == {p.id: p for p in battery_policies()}


def test_ladder(rt):
    seen = []
    for level in (100, 50, 10):
        rt.step("BatteryLevel", level)
        seen.append(location_layers(rt))
    assert seen == [["gps"], ["wifi"], ["cell"]]


def test_ladder_back_up(rt):
    for level in (10, 50, 100):
        rt.step("BatteryLevel", level)
    assert location_layers(rt) == ["gps"]
    assert rt.app.component("FeatureFilter").active_layer_ids() == ["full"]


@given(st.lists(st.integers(0, 100), min_size=1, max_size=20))
def test_exactly_one_location_layer_always(levels):
    fx = build_fixture()
    rt = launch(fx.doc, fx.factories, fx.entities)
    for level in levels:
        rt.step("BatteryLevel", level)
        expected = {"high": "gps", "mid": "wifi", "low": "cell"}[battery_band(level)]
        assert location_layers(rt) == [expected]


def test_threshold_override():
    fx = build_fixture(80, 40)
    rt = launch(fx.doc, fx.factories, fx.entities)
    rt.step("BatteryLevel", 75)
    assert location_layers(rt) == ["wifi"]
    rt.step("BatteryLevel", 35)
    assert location_layers(rt) == ["cell"]
    assert rt.app.component("FeatureFilter").active_layer_ids() == ["reduced"]
    with pytest.raises(ValueError):
        build_fixture(30, 70)


def test_filter_examples():
    assert [f.score for f in filter_features(feats(0.5, 0.8, 1.0), "low")] == [0.8, 1.0]
    assert filter_features(feats(0.1, 0.9), "high") == feats(0.1, 0.9)
    assert filter_features([], "low") == []
    with pytest.raises(ValueError):
        Feature("x", "x", (0, 0), 1.5)


@given(st.lists(st.floats(0, 1), max_size=30))
def test_filter_bounds(scores):
    kept = filter_features(feats(*scores), "low")
    assert all(0.7 <= f.score <= 1 for f in kept)
    assert len(kept) == sum(1 for s in scores if 0.7 <= s <= 1)


def test_filter_through_component(rt):
    catalogue = load_features()
    rt.step("BatteryLevel", 10)
    kept = send_message(rt.app, "FeatureFilter", Message("filterFeatures", (catalogue,)))
    assert [f.score for f in kept] == sorted((f.score for f in catalogue if f.score >= 0.7),
                                             key=[f.score for f in catalogue].index)
    rt.step("BatteryLevel", 90)
    assert send_message(rt.app, "FeatureFilter", Message("filterFeatures", (catalogue,))) == catalogue


def test_source_ordering():
    acc = [SOURCES[s][0] for s in ("gps", "wifi", "cell")]
    energy = [SOURCES[s][1] for s in ("gps", "wifi", "cell")]
    assert acc == sorted(acc) and energy == sorted(energy, reverse=True)


def test_location_fix():
    assert location_fix("gps", DeviceState()).source == "gps"
    assert location_fix("cell", DeviceState(sleep=True)) is None
    with pytest.raises(NoActiveLocationLayer):
        location_fix(None, DeviceState())


def test_sleep_economy(rt):
    lm = rt.app.component(LM)
    send_message(rt.app, LM, Message("locate"))
    awake = lm.state["energy"]
    rt.step("SleepMode", True)
    for level in (60, 20):
        rt.step("BatteryLevel", level)
        for _ in range(5):
            assert send_message(rt.app, LM, Message("locate")) is None
    assert lm.state["energy"] == awake
    rt.step("SleepMode", False)
    assert send_message(rt.app, LM, Message("locate")).source == "cell"
    assert lm.state["energy"] == awake + SOURCES["cell"][1]


def test_speed_policy():
    assert proactive_speed_policy(5) == 1000
    assert proactive_speed_policy(20) == 2000
    assert proactive_speed_policy(0) == 1000


def test_speed_interval_through_component(rt):
    interval = lambda: send_message(rt.app, LM, Message("updateInterval"))
    assert interval() == 1000
    rt.step("Speed", 35)
    assert interval() == 3000
    rt.step("Speed", 2)
    assert interval() == 1000


def test_bandwidth_drives_nothing(rt):
    report = rt.step("Bandwidth", 5)
    assert report.deliveries == 0 and report.records == []
    assert ENTITIES["Bandwidth"] == 100
