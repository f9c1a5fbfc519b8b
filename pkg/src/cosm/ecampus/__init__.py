from .model import (ENTITIES, HIGH, LOW, SOURCES, DeviceState, Feature, Fixture,
                    LocationFix, NoActiveLocationLayer, battery_band,
                    battery_policies, build_fixture, factories, filter_features,
                    fixture_text, load_features, location_fix,
                    proactive_speed_policy, scenario_path)
