from .engines import (ComparisonReport, EventCost, Joinpoint, RunReport, compare,
                      default_joinpoints, isolated_costs, run_cosm, run_daop,
                      run_repeats)
from .scenario import Scenario, ScenarioStep, load_scenario, parse_scenario
