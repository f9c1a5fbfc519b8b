import dataclasses
import random

import pytest
from hypothesis import given, settings, strategies as st

from cosm import expr as ex
from cosm.actions import (ActivateLayer, DeactivateLayer, InvokeSelector, LoadComponent,
                          RebindDelegate, ReplaceComponent)
from cosm.adaptation import CompositionPlan, build_composition_plan, execute_plan
from cosm.errors import PolicyNotFound
from cosm.kernel import CocaComponent, Handler, Kind
from cosm.policy import DecisionPolicy, Goal, PolicyRepository, Rule
from cosm.runtime import launch
from cosm.verification import (VerificationOutcome, apply_to_digest, check_goals,
                               resource_gauges, state_transition_check, verify_plan,
                               verify_policy)

LM = "LocationManager"


def codes(rt, *actions):
    plan = CompositionPlan(1, tuple(actions))
    outcome = verify_plan(rt.app, plan)
    assert plan.verified == outcome.verified
    return outcome.codes()


def test_valid_plan(rt):
    assert codes(rt, DeactivateLayer(LM, "gps"), ActivateLayer(LM, "cell"),
                 InvokeSelector(LM, "locate")) == []


@pytest.mark.parametrize("actions,code", [
    ((ActivateLayer("Ghost", "x"),), "unknown-component"),
    ((ActivateLayer(LM, "satellite"),), "dangling-layer"),
    ((LoadComponent("Ghost"),), "missing-factory"),
    ((ReplaceComponent("MapView", "Ghost"),), "missing-factory"),
    ((LoadComponent("MapView"),), "duplicate-component"),
    ((RebindDelegate(LM, LM),), "self-delegate"),
    ((LoadComponent("WifiLocator"), RebindDelegate(LM, "WifiLocator")), "nonconforming-delegate"),
    ((DeactivateLayer(LM, "gps"), InvokeSelector(LM, "locate")), "unresponsive-selector"),
    ((ActivateLayer(LM, "wifi"),), "exclusive-group-violation"),
    ((LoadComponent("WifiLocator"), LoadComponent("CellLocator")), "constraint-breach"),
    (("reboot",), "unknown-action"),
])
def test_error_codes(rt, actions, code):
    assert code in codes(rt, *actions)


def test_post_state_prediction_sees_earlier_actions(rt):
    assert codes(rt, DeactivateLayer(LM, "gps"), ActivateLayer(LM, "wifi"),
                 InvokeSelector(LM, "locate")) == []
    assert codes(rt, LoadComponent("WifiLocator"), InvokeSelector("WifiLocator", "locate")) == []
    assert "unresponsive-selector" in codes(rt, InvokeSelector(LM, "locate"), DeactivateLayer(LM, "gps"))


def test_goal_breach_blocks_plan(rt):
    policies = rt.app.graph.policies
    old = policies.get_policy_for_key("batteryHigh")
    policies.add_policy(dataclasses.replace(old, goals=(Goal("memory-units", "<=", 100),)))
    rt.app.gauges["memory-units"] = 120
    before = rt.app.graph.digest()
    rt.step("BatteryLevel", 50)
    assert rt.app.component(LM).active_layer_ids() == ["gps"]
    failure = next(f for f in rt.adaptation.failures if f.outcome is not None)
    assert failure.outcome.codes() == ["constraint-breach"]
    assert rt.app.graph.digest() == before
    rt.app.gauges["memory-units"] = 80
    rt.step("BatteryLevel", 40)
    assert rt.app.component(LM).active_layer_ids() == ["wifi"]


def test_goals_checked_against_gauges_then_properties():
    goals = (Goal("component-count", "<=", 4), Goal("maxComponents", "==", 4), Goal("latency", "<", 3))
    outcome = VerificationOutcome()
    checks = check_goals(goals, {"component-count": 5}, {"maxComponents": 4}, outcome)
    assert [c.holds() for c in checks] == [False, True]
    assert [d.code for d in outcome.errors] == ["constraint-breach"]
    assert outcome.codes() == ["constraint-breach", "unobservable-goal"]


def test_unobservable_goal_is_only_a_warning():
    repo = PolicyRepository([DecisionPolicy("p", (Rule(ex.Const(True)),), goals=(Goal("latency", "<", 3),))])
    outcome, result = verify_policy(repo, "p", {})
    assert outcome.verified and result is not None
    with pytest.raises(PolicyNotFound):
        verify_policy(repo, "q", {})


def test_evaluation_error_reported():
    repo = PolicyRepository([DecisionPolicy("p", (Rule(ex.parse("b > 1")),), externals={"b": "B"})])
    outcome, result = verify_policy(repo, "p", {})
    assert result is None and outcome.codes() == ["evaluation-error"]


def test_resource_gauges(rt):
    assert resource_gauges(rt.app) == {"component-count": 3, "active-layers": 2, "battery": 100}
    rt.app.gauges["component-count"] = 9
    assert resource_gauges(rt.app)["component-count"] == 9


def test_tampered_digest_detected(rt):
    plan = build_composition_plan(rt.app.graph, [[ActivateLayer(LM, "wifi")]])
    verify_plan(rt.app, plan)
    record = execute_plan(rt.app, plan)
    assert state_transition_check(record, plan)
    forged = dataclasses.replace(record, after=dataclasses.replace(
        record.after, active=record.after.active | {(LM, "cell")}))
    assert not state_transition_check(forged, plan)
    assert not state_transition_check(record, [ActivateLayer(LM, "cell")])


POOL = [ActivateLayer(LM, "gps"), ActivateLayer(LM, "wifi"), ActivateLayer(LM, "cell"),
        DeactivateLayer(LM, "gps"), ActivateLayer("FeatureFilter", "reduced"),
        ActivateLayer("FeatureFilter", "full"), LoadComponent("WifiLocator"),
        LoadComponent("OfflineMap"), ReplaceComponent("FeatureFilter", "CellLocator"),
        InvokeSelector("MapView", "render")]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32))
def test_post_state_matches_execution(seed):
    from cosm.ecampus import build_fixture
    fx = build_fixture()
    rt = launch(fx.doc, fx.factories, fx.entities)
    rng = random.Random(seed)
    raw = [rng.choice(POOL) for _ in range(rng.randint(1, 5))]
    try:
        plan = build_composition_plan(rt.app.graph, [raw], factories=rt.app.factories)
    except Exception:
        return
    if not verify_plan(rt.app, plan).verified:
        return
    record = execute_plan(rt.app, plan)
    assert apply_to_digest(record.before, plan.actions) == rt.app.graph.digest()
