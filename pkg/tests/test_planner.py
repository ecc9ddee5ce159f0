import json
import math

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from uavlight import energy as en
from uavlight.geometry import horizontal_distance
from uavlight.planner import (MissionPlan, NoReliefAvailableError, PlannerConfig, bearing_cw,
                              build_cycle, derive_flight_params, lighting_radius, load_plan,
                              plan_from_dict, plan_mission, replay)
from uavlight.scenario import UavPose, scenario_from_dict

from conftest import SCENARIOS, scenario_dict


@pytest.mark.parametrize("target, rotate, forward", [
    ((0, 3), 0.0, 3.0), ((4, 0), 90.0, 4.0), ((0, 0), 0.0, 0.0),
    ((0, -2), 180.0, 2.0), ((-1, 1), 315.0, math.sqrt(2)),
])
def test_flight_params_from_bearing(target, rotate, forward):
    fp = derive_flight_params(UavPose(0, 0), target, 1.5, 2.2, 10.0)
    assert fp.rotate_cw == pytest.approx(rotate)
    assert fp.forward == pytest.approx(forward)
    assert fp.descend_or_climb == pytest.approx(-0.7)


def test_bearing_from_offset_home():
    assert bearing_cw(UavPose(1, 1), (2, 1)) == pytest.approx(90)


def test_idle_cycle():
    cycle, segs = build_cycle(0.0, (1.5, 1.5), (0.7, 1.0), 0.0)
    assert cycle.t_off > 0 and cycle.t_land > 0
    assert cycle.t_deploy == cycle.t_light == cycle.t_back == 0
    assert [s.phase for s in segs] == ["off", "light", "land"]


def test_ten_meter_leg():
    cycle, _ = build_cycle(10.0, (2.0, 2.0), (0.7, 1.0), 5.0)
    assert cycle.t_deploy == pytest.approx(10) and cycle.t_back == pytest.approx(10)


def test_cycle_with_turn_and_descent():
    cycle, segs = build_cycle(4.0, (2.2, 1.5), (0.7, 1.0), 30.0, heading=90, rotate=90)
    assert cycle.t_deploy == pytest.approx(1.0 + 4.0 + 0.7 / 0.7)
    assert cycle.t_back == pytest.approx(4.0)
    assert sum(s.duration for s in segs) == pytest.approx(cycle.total)
    end = replay(UavPose(0, 0), segs)
    assert end[-1] == pytest.approx((0, 0, 0), abs=1e-12)


def _check_plan(plan, scenario):
    tan = math.tan(math.radians(scenario.light_angle))
    for p in plan.uavs:
        poses = replay(p.home, p.segments)
        assert all(abs(a - b) <= 1e-9 for a, b in zip(poses[-1], (p.home.X, p.home.Y, p.home.Z)))
        light = [k for k, s in enumerate(p.segments) if s.phase == "light"]
        hover = poses[light[0]]
        assert hover == pytest.approx((p.target[0], p.target[1], p.service_height), abs=1e-9)
        assert sum(s.duration for s in p.segments) == pytest.approx(p.cycle.total, abs=1e-9)
        radius = p.service_height * tan
        assert lighting_radius(p, scenario.light_angle) == pytest.approx(radius)
        for i in p.users:
            u = scenario.users[i]
            assert horizontal_distance(UavPose(*p.target, p.service_height), u) <= radius + 1e-9
        band = scenario.band(p.band)
        assert band.h_min <= p.service_height <= band.h_max + 1e-9
        # whole-degree turns and whole-centimeter moves
        assert p.flight_params.rotate_cw == int(p.flight_params.rotate_cw)
        assert abs(p.flight_params.forward * 100 - round(p.flight_params.forward * 100)) < 1e-9
        assert 100 - p.energy.pct_total >= p.reserve_pct - 1e-9
    for r in plan.replacements:
        incumbent, relief = plan.uav(r.uav_index), plan.uav(r.relief_uav_index)
        assert relief.light_start <= incumbent.light_end + 1e-9
        assert r.handover_time == pytest.approx(incumbent.light_end)


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_plan_invariants(name, plans, scenarios):
    _check_plan(plans[name], scenarios[name])


def test_dense_plan(plans):
    plan = plans["dense"]
    assert len(plan.uavs) == 1 and plan.replacements == ()
    p = plan.uavs[0]
    assert p.cycle.t_light == 30 and p.unserved_s == 0
    assert p.service_height == pytest.approx(1.5)
    assert p.transit_height == pytest.approx(2.2)


def test_sparse_plan(plans):
    plan = plans["sparse"]
    assert sorted(p.band for p in plan.uavs) == [2, 3]
    assert plan.replacements == ()


def test_relief_plan(plans):
    plan = plans["relief"]
    assert len(plan.replacements) == 1
    rep = plan.replacements[0]
    primary, relief = plan.uav(rep.uav_index), plan.uav(rep.relief_uav_index)
    assert primary.role == "primary" and relief.role == "relief"
    assert primary.cycle.t_light < 600
    assert relief.launch_time > 0
    # 600 s of lamp alone is 120 % of a battery; both UAVs stop at their reserve
    for p in (primary, relief):
        left = 100 - p.energy.pct_total
        assert p.reserve_pct <= left <= p.reserve_pct + p.energy.light_rate_pct * 1.01 + 1e-6
    assert primary.unserved_s == pytest.approx(600 - primary.cycle.t_light)
    served = primary.cycle.t_light + relief.cycle.t_light - (primary.light_end - relief.light_start)
    assert relief.unserved_s == pytest.approx(600 - served, abs=1e-6)


def test_no_relief_left():
    raw = scenario_dict("relief")
    raw["fleet"] = raw["fleet"][:1]
    with pytest.raises(NoReliefAvailableError):
        plan_mission(scenario_from_dict(raw))


def test_energy_matches_segments(plans):
    for plan in plans.values():
        for p in plan.uavs:
            again = en.mission_energy(p.segments, p.cycle.t_light, plan.propulsion,
                                      plan.capacity_j, plan.mu)
            assert again == p.energy


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_json_round_trip(name, plans, tmp_path):
    plan = plans[name]
    path = tmp_path / "plan.json"
    path.write_text(plan.to_json())
    again = load_plan(path)
    assert again == plan
    assert again.to_json() == plan.to_json()


def test_malformed_plan():
    with pytest.raises(ValueError):
        plan_from_dict({"uavs": []})


def test_same_seed_same_plan(scenarios):
    sc = scenarios["sparse"]
    a = plan_mission(sc, PlannerConfig.from_scenario(sc, seed=5))
    b = plan_mission(sc, PlannerConfig.from_scenario(sc, seed=5))
    assert a.to_json() == b.to_json()


def test_config_overrides():
    raw = scenario_dict("dense")
    raw.update(speeds={"horizontal": 2.0, "yaw_rate": 45.0},
               energy={"mu_pct_per_s": 0.1, "capacity_j": 20000})
    cfg = PlannerConfig.from_scenario(scenario_from_dict(raw), seed=9)
    assert (cfg.v_horizontal, cfg.yaw_rate, cfg.mu, cfg.capacity_j) == (2.0, 45.0, 0.1, 20000)
    assert cfg.anneal.rng_seed == 9
    raw["speeds"] = {"warp": 9}
    with pytest.raises(ValueError):
        PlannerConfig.from_scenario(scenario_from_dict(raw))


cluster_st = st.lists(st.tuples(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4)), min_size=1,
                      max_size=6)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(cluster=cluster_st, cx=st.floats(-6, 6), cy=st.floats(-6, 6),
       beta=st.integers(1, 3), t_user=st.floats(1, 60))
def test_random_dense_plans(cluster, cx, cy, beta, t_user):
    raw = {"users": [{"x": cx + x, "y": cy + y, "beta": beta, "t_user": t_user}
                     for x, y in cluster],
           "fleet": [{"home": [0, 0, 0]}, {"home": [1, 0, 0]}],
           "anneal": {"inner_iters": 10}}
    sc = scenario_from_dict(raw)
    plan = plan_mission(sc)
    assert isinstance(plan, MissionPlan)
    _check_plan(plan, sc)
    assert json.loads(plan.to_json())["uavs"][0]["users"] == list(range(len(cluster)))
