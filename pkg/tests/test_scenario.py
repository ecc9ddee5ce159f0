import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from uavlight.scenario import (DEFAULT_BANDS, BrightnessBand, Scenario, ScenarioError,
                               ScenarioParseError, ServiceCycle, TrajectorySegment, UavPose,
                               UserRequest, load_scenario, save_scenario, scenario_from_dict,
                               scenario_to_dict)

from conftest import SCENARIOS, scenario_dict


def test_two_user_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({
        "users": [{"x": 1, "y": 1, "beta": 2, "t_user": 60}, {"x": 2, "y": 2, "beta": 2, "t_user": 60}],
        "fleet": [{"home": [0, 0, 0]}]}))
    sc = load_scenario(path)
    assert len(sc.users) == 2
    assert sc.users[1] == UserRequest(2.0, 2.0, 2, 60.0)
    assert sc.homes == (UavPose(0, 0, 0),)
    assert sc.light_angle == 30 and sc.battery_full == 100
    assert sc.bands == DEFAULT_BANDS


@pytest.mark.parametrize("mutate, err", [
    (lambda d: d["users"][0].update(beta=4), ScenarioError),
    (lambda d: d["users"][0].update(beta=0), ScenarioError),
    (lambda d: d.update(users=[]), ScenarioError),
    (lambda d: d.update(fleet=[]), ScenarioError),
    (lambda d: d["users"][0].update(t_user=0), ScenarioError),
    (lambda d: d["users"][0].update(x="a"), ScenarioParseError),
    (lambda d: d["users"][0].pop("y"), ScenarioParseError),
    (lambda d: d["fleet"][0].update(home=[1]), ScenarioParseError),
    (lambda d: d["fleet"][0].update(home=[0, 0, -1]), ScenarioError),
    (lambda d: d.update(light_angle_deg=90), ScenarioError),
    (lambda d: d.update(battery_full_pct=101), ScenarioError),
    (lambda d: d.update(bands={"1": [1.0, 1.6]}), ScenarioError),  # overlaps level 2
    (lambda d: d.update(bands={"4": [1.0, 2.0]}), ScenarioError),
    (lambda d: d.update(bands={"2": [2.0, 1.0]}), ScenarioError),
])
def test_invalid_files_rejected(mutate, err):
    raw = scenario_dict("dense")
    mutate(raw)
    with pytest.raises(err):
        scenario_from_dict(raw)


def test_bad_json(tmp_path):
    path = tmp_path / "s.json"
    path.write_text("{users: ")
    with pytest.raises(ScenarioParseError):
        load_scenario(path)


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_round_trip(name, tmp_path):
    sc = scenario_from_dict(scenario_dict(name))
    save_scenario(sc, tmp_path / "s.json")
    assert load_scenario(tmp_path / "s.json") == sc


def test_round_trip_keeps_override_blocks():
    raw = scenario_dict("dense")
    raw.update(light_angle_deg=40, battery_full_pct=80, bands={"3": [2.5, 3.5]},
               energy={"mu_pct_per_s": 0.1}, speeds={"horizontal": 2.0}, anneal={"rng_seed": 3})
    sc = scenario_from_dict(raw)
    assert scenario_from_dict(json.loads(json.dumps(scenario_to_dict(sc)))) == sc
    assert sc.band(3) == BrightnessBand(3, 2.5, 3.5)


def test_cycle_total():
    c = ServiceCycle(1.0, 2.0, 3.0, 4.0, 5.0)
    assert c.total == 15.0
    with pytest.raises(ValueError):
        ServiceCycle(-1, 0, 0, 0, 0)


@pytest.mark.parametrize("phase, d", [
    ("off", (1, 0, 1)), ("land", (0, 1, -1)), ("back", (1, 0, 1)),
    ("light", (0, 0, 1)), ("deploy", (1, 1, 1)), ("cruise", (0, 0, 0)),
])
def test_segment_phase_rules(phase, d):
    with pytest.raises(ValueError):
        TrajectorySegment(phase, *d, speed=1.0, duration=1.0)


finite = st.floats(-1e3, 1e3, allow_nan=False)
user_st = st.fixed_dictionaries({
    "x": st.one_of(finite, st.just(math.nan), st.just("1"), st.none()),
    "y": finite,
    "beta": st.one_of(st.integers(-1, 5), st.just(2.0), st.just(True)),
    "t_user": st.one_of(st.floats(-10, 1e3), st.just(math.nan), st.just(math.inf)),
})
home_st = st.lists(st.one_of(finite, st.just(math.inf)), min_size=1, max_size=4)


def _valid(raw) -> bool:
    """Independent restatement of the validity rules."""
    if not raw["users"] or not raw["fleet"]:
        return False
    for u in raw["users"]:
        x = u["x"]
        if not isinstance(x, float) or not math.isfinite(x):
            return False
        beta = u["beta"]
        if isinstance(beta, bool) or beta not in (1, 2, 3):
            return False
        if not (math.isfinite(u["t_user"]) and u["t_user"] > 0):
            return False
    for f in raw["fleet"]:
        h = f["home"]
        if len(h) not in (2, 3) or not all(math.isfinite(c) for c in h):
            return False
        if len(h) == 3 and h[2] < 0:
            return False
    return 0 < raw["light_angle_deg"] < 90


@settings(max_examples=300, deadline=None)
@given(users=st.lists(user_st, max_size=4), homes=st.lists(home_st, max_size=3),
       angle=st.floats(-10, 100, allow_nan=False))
def test_fuzzed_files_accepted_iff_valid(users, homes, angle):
    raw = {"users": users, "fleet": [{"home": h} for h in homes], "light_angle_deg": angle}
    if _valid(raw):
        sc = scenario_from_dict(raw)
        assert isinstance(sc, Scenario)
        assert scenario_from_dict(scenario_to_dict(sc)) == sc
    else:
        with pytest.raises(ScenarioError):
            scenario_from_dict(raw)
