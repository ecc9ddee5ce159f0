import copy

import pytest

from uavlight.flighttext import compile_plan
from uavlight.planner import plan_mission
from uavlight.scenario import scenario_from_dict
from uavlight.sim import fly_mock

# five users inside half a meter, one UAV at the origin
DENSE = {
    "users": [
        {"x": 2.0, "y": 3.0, "beta": 2, "t_user": 20},
        {"x": 2.3, "y": 3.2, "beta": 2, "t_user": 25},
        {"x": 1.8, "y": 3.3, "beta": 2, "t_user": 15},
        {"x": 2.1, "y": 2.7, "beta": 2, "t_user": 20},
        {"x": 2.4, "y": 2.9, "beta": 2, "t_user": 30},
    ],
    "fleet": [{"home": [0, 0, 0]}],
}

# two brightness groups 100 m apart, each UAV parked next to its group
SPARSE = {
    "users": [
        {"x": -50.0, "y": 0.0, "beta": 2, "t_user": 20},
        {"x": -49.6, "y": 0.4, "beta": 2, "t_user": 20},
        {"x": -50.3, "y": 0.2, "beta": 2, "t_user": 20},
        {"x": 50.0, "y": 0.0, "beta": 3, "t_user": 25},
        {"x": 50.4, "y": 0.3, "beta": 3, "t_user": 25},
        {"x": 49.7, "y": -0.3, "beta": 3, "t_user": 25},
    ],
    "fleet": [{"home": [-48, -2, 0]}, {"home": [48, -2, 0]}],
}

# two short jobs a few meters from their UAVs
PAIR = {
    "users": [
        {"x": -2.0, "y": 2.0, "beta": 1, "t_user": 10},
        {"x": -2.3, "y": 2.2, "beta": 1, "t_user": 10},
        {"x": -1.8, "y": 2.3, "beta": 1, "t_user": 10},
        {"x": 2.0, "y": 2.0, "beta": 3, "t_user": 10},
        {"x": 2.3, "y": 2.4, "beta": 3, "t_user": 10},
        {"x": 1.7, "y": 2.2, "beta": 3, "t_user": 10},
    ],
    "fleet": [{"home": [-1, 0, 0]}, {"home": [1, 0, 0]}],
}

# ten minutes of light: more than one battery can give
RELIEF = {
    "users": [
        {"x": 2.0, "y": 3.0, "beta": 2, "t_user": 600},
        {"x": 2.3, "y": 3.2, "beta": 2, "t_user": 600},
        {"x": 1.8, "y": 3.3, "beta": 2, "t_user": 600},
    ],
    "fleet": [{"home": [0, 0, 0]}, {"home": [0.5, 0, 0]}],
}

SCENARIOS = {"dense": DENSE, "sparse": SPARSE, "pair": PAIR, "relief": RELIEF}


def scenario_dict(name):
    return copy.deepcopy(SCENARIOS[name])


@pytest.fixture(scope="session")
def scenarios():
    return {name: scenario_from_dict(raw) for name, raw in SCENARIOS.items()}


@pytest.fixture(scope="session")
def plans(scenarios):
    return {name: plan_mission(sc) for name, sc in scenarios.items()}


class _Flights(dict):
    """Mock flights of the compiled plans, flown on first use."""

    SPEEDUP = {"relief": 10.0}

    def __init__(self, plans):
        super().__init__()
        self.plans = plans

    def __missing__(self, name):
        plan = self.plans[name]
        text = compile_plan(plan, [f"SN{i:02d}" for i in range(len(plan.uavs))])
        self[name] = fly_mock(text, plan, speedup=self.SPEEDUP.get(name, 20.0))
        return self[name]


@pytest.fixture(scope="session")
def flights(plans):
    return _Flights(plans)


# criterion number -> (verdict, description); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n, (verdict, text) in sorted(ACCEPTANCE.items()):
            terminalreporter.write_line(f"{verdict} criterion {n}: {text}")
