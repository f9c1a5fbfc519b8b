"""Campus map personalisation: location source, feature density, sleep and speed."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from typing import Iterable, Optional

from .. import expr as ex
from ..actions import ActivateLayer, EvaluatePolicy
from ..adl import ADLDocument, parse_adl
from ..errors import CosmError
from ..kernel import CocaComponent, FactoryRegistry, Handler, Kind, Layer
from ..policy import DecisionPolicy, Goal, Rule

HIGH = 70
LOW = 30
LOW_BAND_MIN_SCORE = 0.7

BASE_INTERVAL_MS = 1000
SPEED_THRESHOLD = 10.0

ENTITIES = {"BatteryLevel": 100, "Speed": 0, "SleepMode": False, "Bandwidth": 100}


class NoActiveLocationLayer(CosmError):
    pass


@dataclass(frozen=True)
class Feature:
    id: str
    name: str
    position: tuple
    score: float

    def __post_init__(self):
        if not 0 <= self.score <= 1:
            raise ValueError(f"interest score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class LocationFix:
    position: tuple
    accuracy: int
    source: str
    energy_cost: int


@dataclass(frozen=True)
class DeviceState:
    battery: int = 100
    sleep: bool = False
    speed: float = 0.0


# accuracy radius and energy per fix, in abstract units
SOURCES = {
    "gps": (5, 10),
    "wifi": (25, 4),
    "cell": (150, 1),
}


def battery_band(level, high: int = HIGH, low: int = LOW) -> str:
    if level >= high:
        return "high"
    if level >= low:
        return "mid"
    return "low"


def filter_features(features: Iterable[Feature], band: str) -> list:
    """At low battery keep only features scoring in [0.7, 1]."""
    if band == "low":
        return [f for f in features if LOW_BAND_MIN_SCORE <= f.score <= 1]
    return list(features)


def location_fix(source: Optional[str], device: DeviceState,
                 position=(0, 0)) -> Optional[LocationFix]:
    """A fix from ``source``; None while the device sleeps."""
    if device.sleep:
        return None
    if source is None:
        raise NoActiveLocationLayer("no location layer is active")
    accuracy, energy = SOURCES[source]
    return LocationFix(tuple(position), accuracy, source, energy)


def proactive_speed_policy(speed, base_interval: int = BASE_INTERVAL_MS,
                           threshold: float = SPEED_THRESHOLD) -> int:
    return base_interval * max(1, math.floor(speed / threshold))


def load_features(path=None) -> list:
    if path is None:
        text = resources.files(__package__).joinpath("data/features.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    features = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected id name x y score")
        fid, name, x, y, score = parts
        features.append(Feature(fid, name, (float(x), float(y)), float(score)))
    return features


# -- components ---------------------------------------------------------------

def _locate(source):
    def handler(state, msg):
        device = DeviceState(state.get("battery", 100), state.get("sleep", False),
                             state.get("speed", 0))
        fix = location_fix(source, device, state.get("position", (0, 0)))
        if fix is not None:
            state["energy"] = state.get("energy", 0) + fix.energy_cost
            state["fixes"] = state.get("fixes", 0) + 1
        return fix
    return handler


def _remember(key):
    def handler(state, msg):
        state[key] = msg.args[1] if len(msg.args) > 1 else msg.args[0]
        return state[key]
    return handler


def _speed_will_change(state, msg):
    new_speed = msg.args[1]
    state["interval"] = proactive_speed_policy(new_speed)
    return state["interval"]


def map_view() -> CocaComponent:
    def render(state, msg):
        state["renders"] = state.get("renders", 0) + 1
        return state["renders"]

    def show(state, msg):
        state["shown"] = list(msg.args[0]) if msg.args else []
        return len(state["shown"])

    def center(state, msg):
        state["center"] = tuple(msg.args)
        return state["center"]

    return CocaComponent("MapView", Kind.BASE, static={
        "render": Handler(render), "showFeatures": Handler(show),
        "centerOn": Handler(center)})


def location_manager() -> CocaComponent:
    return CocaComponent(
        "LocationManager", Kind.CONTEXT_ORIENTED,
        static={
            "updateInterval": Handler(lambda state, msg: state.get("interval", BASE_INTERVAL_MS)),
            "SpeedWillChange": Handler(_speed_will_change),
            "SleepModeDidChange": Handler(_remember("sleep")),
            "BatteryLevelDidChange": Handler(_remember("battery")),
        },
        layers=[Layer(src, {"locate": Handler(_locate(src), cost_units=SOURCES[src][1])})
                for src in ("gps", "wifi", "cell")])


def feature_filter() -> CocaComponent:
    def band_filter(band):
        return lambda state, msg: filter_features(msg.args[0] if msg.args else [], band)
    return CocaComponent("FeatureFilter", Kind.CONTEXT_ORIENTED, layers=[
        Layer("full", {"filterFeatures": Handler(band_filter("high"))}),
        Layer("reduced", {"filterFeatures": Handler(band_filter("low"))})])


def wifi_locator() -> CocaComponent:
    """Stand-alone wifi provider: the external-composition twin of the wifi layer."""
    return CocaComponent("WifiLocator", Kind.BASE, static={"locate": Handler(_locate("wifi"))},
                         protocol={"locate": True})


def cell_locator() -> CocaComponent:
    return CocaComponent("CellLocator", Kind.BASE, static={"locate": Handler(_locate("cell"))},
                         protocol={"locate": True})


def offline_map() -> CocaComponent:
    return CocaComponent("OfflineMap", Kind.CONTEXT_ORIENTED, layers=[
        Layer("cached", {"tiles": Handler(lambda state, msg: "cached")})],
        protocol={"tiles": True}, observes=("Bandwidth",))


def factories() -> FactoryRegistry:
    return FactoryRegistry({
        "MapView": map_view,
        "LocationManager": location_manager,
        "FeatureFilter": feature_filter,
        "WifiLocator": wifi_locator,
        "CellLocator": cell_locator,
        "OfflineMap": offline_map,
    })


# -- policies -----------------------------------------------------------------

def battery_policies(high: int = HIGH, low: int = LOW) -> tuple:
    """The battery ladder: gps at or above ``high``, wifi down to ``low``, then cell."""
    if not low < high:
        raise ValueError(f"low threshold {low} must be below high threshold {high}")
    battery = {"battery": "BatteryLevel"}
    did = "BatteryLevelDidChange"
    return (
        DecisionPolicy("batteryHigh", (Rule(
            ex.Compare("battery", ">=", high),
            (ActivateLayer("LocationManager", "gps"),),
            (EvaluatePolicy("batteryLow"),), did),),
            "power", {}, battery, (Goal("component-count", "<=", 4),)),
        DecisionPolicy("batteryLow", (Rule(
            ex.Compare("battery", ">=", low),
            (ActivateLayer("LocationManager", "wifi"),),
            (ActivateLayer("LocationManager", "cell"),)),),
            "power", {}, battery),
        DecisionPolicy("features", (Rule(
            ex.Compare("battery", "<", low),
            (ActivateLayer("FeatureFilter", "reduced"),),
            (ActivateLayer("FeatureFilter", "full"),), did),),
            "display", {}, battery),
    )


def fixture_text() -> str:
    return resources.files(__package__).joinpath("data/ecampus.xml").read_text("utf-8")


def scenario_path(name: str):
    return resources.files(__package__).joinpath(f"data/{name}")


@dataclass
class Fixture:
    doc: ADLDocument
    factories: FactoryRegistry
    entities: dict
    high: int = HIGH
    low: int = LOW


def retune(doc: ADLDocument, high: int, low: int) -> ADLDocument:
    tuned = {p.id: p for p in battery_policies(high, low)}
    return replace(doc, policies=tuple(tuned.get(p.id, p) for p in doc.policies))


def build_fixture(high: int = HIGH, low: int = LOW, doc: Optional[ADLDocument] = None) -> Fixture:
    """Parse the shipped ADL (or ``doc``) and apply battery thresholds."""
    doc = parse_adl(fixture_text()) if doc is None else doc
    if (high, low) != (HIGH, LOW):
        doc = retune(doc, high, low)
    return Fixture(doc, factories(), dict(ENTITIES), high, low)
