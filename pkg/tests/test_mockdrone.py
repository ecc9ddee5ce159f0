import json
import math
import socket

import pytest
from hypothesis import given, settings, strategies as st

from uavlight.energy import PropulsionParams, hover_powers
from uavlight.flighttext import compile_plan
from uavlight.mockdrone import FaultProfile, MockDrone, MockEndpoint
from uavlight.planner import replay
from uavlight.scenario import UavPose
from uavlight.simclock import ManualClock, SimClock

REF = PropulsionParams()


def drone(**kw):
    clock = kw.pop("clock", ManualClock())
    return MockDrone("SN1", kw.pop("home", UavPose(0, 0)), clock=clock, **kw), clock


def test_fresh_boot():
    d, _ = drone()
    assert d.handle("command") == ("ok", 0.0)
    assert d.handle("battery?")[0] == "100"
    assert d.handle("sn?")[0] == "SN1"


def test_forward_along_heading():
    d, _ = drone()
    d.handle("takeoff")
    d.handle("forward 100")
    assert (d.state.pose.X, d.state.pose.Y) == pytest.approx((0, 1))
    d.handle("cw 90")
    d.handle("forward 100")
    assert (d.state.pose.X, d.state.pose.Y) == pytest.approx((1, 1))
    d.handle("ccw 90")
    d.handle("back 100")
    assert (d.state.pose.X, d.state.pose.Y) == pytest.approx((1, 0))


def test_sixty_second_hover_in_isolation():
    d, clock = drone()
    d.handle("takeoff")
    clock.advance(0.8 / 0.7)
    d.handle("battery?")
    start = d.state.battery
    clock.advance(60)
    d.handle("battery?")
    assert start - d.state.battery == pytest.approx(sum(hover_powers(REF)) * 60 / 15500 * 100,
                                                    rel=1e-9)


def test_landed_battery_constant():
    d, clock = drone()
    clock.advance(100)
    d.handle("battery?")
    assert d.state.battery == 100


def test_lamp_adds_drain_on_station():
    d, clock = drone()
    for cmd in ("takeoff", "forward 100"):
        _, dur = d.handle(cmd)
        clock.advance(dur)
    assert d.state.light_on
    start = d.state.battery
    clock.advance(10)
    d.handle("battery?")
    hover = sum(hover_powers(REF)) / 15500 * 100
    assert start - d.state.battery == pytest.approx(10 * (hover + 0.2), rel=1e-9)
    d.handle("back 100")
    assert not d.state.light_on


@pytest.mark.parametrize("cmd", ["forward 100", "land", "cw 90"])
def test_grounded_refuses_motion(cmd):
    d, _ = drone()
    reply = d.handle(cmd)[0]
    assert reply == ("ok" if cmd == "land" else "error")


@pytest.mark.parametrize("cmd", ["forward 10", "forward 600", "cw 0", "cw 361", "up x",
                                 "flip l", "down 100"])
def test_bad_commands(cmd):
    d, _ = drone()
    d.handle("takeoff")
    assert d.handle(cmd)[0] == "error"


def test_repeated_takeoff_is_harmless():
    d, _ = drone()
    d.handle("takeoff")
    assert d.handle("takeoff") == ("ok", 0.0)
    assert d.state.pose.Z == pytest.approx(0.8)


def test_auto_land_when_empty():
    d, clock = drone(battery=2.0)
    d.handle("takeoff")
    clock.advance(10)
    d.handle("battery?")
    assert d.state.battery == 0 and not d.state.airborne and d.state.pose.Z == 0


def test_battery_script():
    d, clock = drone(faults=FaultProfile(battery_script=[(5000, 4.0)]))
    d.handle("takeoff")
    clock.advance(4)
    assert int(d.handle("battery?")[0]) > 90
    clock.advance(2)
    assert d.handle("battery?")[0] == "4"


def test_fault_profile_parsing(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"drop_prob": 0.3, "delay_ms": {"forward": 8000},
                                "battery_script": [[2000, 50], [1000, 80]]}))
    fp = FaultProfile.load(path)
    assert fp.battery_script == [(1000.0, 80.0), (2000.0, 50.0)]
    with pytest.raises(ValueError):
        FaultProfile.from_dict({"drop": 1})
    with pytest.raises(ValueError):
        FaultProfile(drop_prob=1.5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["forward 50", "back 30", "up 40", "down 20", "cw 45",
                                 "ccw 30", "battery?"]), max_size=15),
       st.lists(st.floats(0, 5), min_size=15, max_size=15))
def test_battery_non_increasing(cmds, gaps):
    d, clock = drone()
    d.handle("takeoff")
    last = d.state.battery
    for cmd, gap in zip(cmds, gaps):
        clock.advance(gap)
        d.handle(cmd)
        assert d.state.battery <= last
        last = d.state.battery


@pytest.mark.parametrize("name", ["dense", "sparse", "relief"])
def test_command_replay_matches_plan(name, plans):
    """Flying the compiled commands puts each mock where the plan's pose law says."""
    plan = plans[name]
    text = compile_plan(plan, [f"S{i}" for i in range(len(plan.uavs))])
    for i, p in enumerate(plan.uavs, start=1):
        d, _ = drone(home=p.home)
        d.handle("takeoff")
        for c in text.body:
            if c.target == i and c.op != "takeoff":
                assert d.handle(c.wire)[0] == "ok"
                if c.op == "down" or (c.op == "forward" and p.service_height == p.transit_height):
                    hover = d.state.pose
        expected = replay(p.home, p.segments)
        station = [k for k, s in enumerate(p.segments) if s.phase == "light"][0]
        assert math.dist((hover.X, hover.Y, hover.Z), expected[station]) <= 0.01
        assert (d.state.pose.X, d.state.pose.Y, d.state.pose.Z) == \
            pytest.approx((p.home.X, p.home.Y, 0), abs=1e-9)


def test_same_commands_same_state():
    a, _ = drone(faults=FaultProfile(drop_prob=0.5, seed=3))
    b, _ = drone(faults=FaultProfile(drop_prob=0.5, seed=3))
    for cmd in ("takeoff", "up 50", "cw 30", "forward 200", "battery?", "back 200", "land"):
        assert a.handle(cmd) == b.handle(cmd)
    assert a.state == b.state


def _ask(ep, text, timeout=2.0):
    s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    s.settimeout(timeout)
    try:
        s.sendto(text.encode(), ep.address)
        return s.recvfrom(1024)[0].decode()
    except socket.timeout:
        return None
    finally:
        s.close()


def test_endpoint_round_trip():
    d, _ = drone(clock=SimClock(100))
    with MockEndpoint(d) as ep:
        assert _ask(ep, "command") == "ok"
        assert _ask(ep, "sn?") == "SN1"


def test_endpoint_drops_everything():
    d, _ = drone(clock=SimClock(100), faults=FaultProfile(drop_prob=1.0))
    with MockEndpoint(d) as ep:
        assert _ask(ep, "command", timeout=0.2) is None
        assert _ask(ep, "battery?", timeout=0.2) is None
    assert [h[0] for h in d.history] == ["command", "battery?"]  # heard, never answered


def test_endpoint_drop_first():
    d, _ = drone(clock=SimClock(100), faults=FaultProfile(drop_first={"sn?": 1}))
    with MockEndpoint(d) as ep:
        assert _ask(ep, "sn?", timeout=0.2) is None
        assert _ask(ep, "sn?") == "SN1"
