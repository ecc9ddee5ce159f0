"""Simulated Tello-class drone speaking the text-over-UDP SDK protocol.

The mock keeps a kinematic pose and a battery fed by the same energy model
the planner uses: moves drain ``propulsion_power(speed) * duration``,
airborne idle time drains hover power, and idle time while on station adds
the lamp drain. Replies are held back for the duration of the move so the
controller sees realistic timing.
"""

from __future__ import annotations

import json
import logging
import math
import random
import socket
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import energy as en
from .scenario import UavPose
from .simclock import SimClock

log = logging.getLogger(__name__)

MOTION = {"forward", "back", "up", "down", "cw", "ccw"}


@dataclass
class FaultProfile:
    drop_prob: float = 0.0
    delay_ms: dict[str, float] = field(default_factory=dict)  # simulated ms per command word
    battery_script: list[tuple[float, float]] = field(default_factory=list)  # (t_ms, pct)
    drop_first: dict[str, int] = field(default_factory=dict)  # drop the first N replies
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.drop_prob <= 1):
            raise ValueError("drop_prob must lie in [0, 1]")
        self.battery_script = sorted((float(t), float(p)) for t, p in self.battery_script)

    @classmethod
    def from_dict(cls, raw: dict) -> "FaultProfile":
        known = {"drop_prob", "delay_ms", "battery_script", "drop_first", "seed"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown fault profile keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def load(cls, path) -> "FaultProfile":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class MockState:
    pose: UavPose
    heading: float
    battery: float
    sn: str
    airborne: bool = False
    light_on: bool = False


class MockDrone:
    """Protocol state machine; ``handle`` is pure apart from the clock."""

    def __init__(self, sn: str, home: UavPose = UavPose(0.0, 0.0, 0.0), battery: float = 100.0,
                 params: en.PropulsionParams | None = None,
                 capacity_j: float = en.DEFAULT_CAPACITY_J, mu: float = en.LIGHT_MU_PCT_PER_S,
                 speeds: tuple[float, float, float] = (0.7, 1.0, 90.0),
                 takeoff_height: float = 0.8, clock=None, faults: FaultProfile | None = None):
        self.state = MockState(UavPose(home.X, home.Y, 0.0), 0.0, battery, sn)
        self.params = params or en.PropulsionParams()
        self.capacity = capacity_j
        self.mu = mu
        self.v_vert, self.v_horiz, self.yaw_rate = speeds
        self.takeoff_height = takeoff_height
        self.clock = clock or SimClock()
        self.faults = faults or FaultProfile()
        self._script = list(self.faults.battery_script)
        self._t0 = self.clock.now()
        self._last = self._t0
        self.hover_pct_per_s = sum(en.hover_powers(self.params)) / self.capacity * 100
        self.history: list[tuple[str, str]] = []
        self.service_pose: UavPose | None = None

    # -- energy bookkeeping ---------------------------------------------

    def _drain(self, pct: float) -> None:
        s = self.state
        s.battery = max(0.0, s.battery - pct)
        if s.battery <= 0 and s.airborne:
            log.warning("%s: battery empty, auto-landing", s.sn)
            s.airborne = False
            s.light_on = False
            s.pose = UavPose(s.pose.X, s.pose.Y, 0.0)

    def _advance(self) -> float:
        now = self.clock.now()
        if now > self._last:
            if self.state.airborne:
                rate = self.hover_pct_per_s + (self.mu if self.state.light_on else 0.0)
                self._drain(rate * (now - self._last))
            self._last = now
        while self._script and self._script[0][0] <= (now - self._t0) * 1000:
            _, pct = self._script.pop(0)
            self.state.battery = min(self.state.battery, pct)
        return now

    def _move(self, now: float, duration: float, speed: float) -> None:
        self._drain(en.propulsion_power(speed, self.params) * duration / self.capacity * 100)
        self._last = max(self._last, now + duration)

    # -- protocol -------------------------------------------------------

    def handle(self, text: str) -> tuple[str, float]:
        """Apply one command; returns (reply, simulated seconds the action takes)."""
        self._advance()
        reply, duration = self._dispatch(text.strip())
        self.history.append((text.strip(), reply))
        return reply, duration

    def _dispatch(self, text: str) -> tuple[str, float]:
        s = self.state
        parts = text.split()
        if not parts:
            return "error", 0.0
        word, args = parts[0].lower(), parts[1:]
        now = self._last  # the drone is free again from here
        if word == "command" and not args:
            return "ok", 0.0
        if word == "sn?":
            return s.sn, 0.0
        if word == "battery?":
            return str(int(math.floor(s.battery))), 0.0
        if word == "takeoff":
            if s.airborne:
                return "ok", 0.0  # repeated takeoff, e.g. after a lost reply
            if s.battery <= 0:
                return "error", 0.0
            s.airborne = True
            duration = self.takeoff_height / self.v_vert
            s.pose = UavPose(s.pose.X, s.pose.Y, self.takeoff_height)
            self._move(now, duration, self.v_vert)
            return "ok", duration
        if word == "land":
            if not s.airborne:
                return "ok", 0.0
            duration = s.pose.Z / self.v_vert
            self._move(now, duration, self.v_vert)
            s.airborne = False
            s.light_on = False
            s.pose = UavPose(s.pose.X, s.pose.Y, 0.0)
            return "ok", duration
        if word not in MOTION:
            return "error", 0.0
        if not s.airborne or len(args) != 1 or not args[0].isdigit():
            return "error", 0.0
        amount = int(args[0])
        if word in ("cw", "ccw"):
            if not (1 <= amount <= 360):
                return "error", 0.0
            s.heading = (s.heading + (amount if word == "cw" else -amount)) % 360
            duration = amount / self.yaw_rate
            self._move(now, duration, 0.0)
            return "ok", duration
        if not (20 <= amount <= 500):
            return "error", 0.0
        d = amount / 100
        if word in ("up", "down"):
            z = s.pose.Z + (d if word == "up" else -d)
            if z < 0.1:
                return "error", 0.0
            s.pose = UavPose(s.pose.X, s.pose.Y, z)
            duration = d / self.v_vert
            speed = self.v_vert
        else:
            sign = 1 if word == "forward" else -1
            rad = math.radians(s.heading)
            s.pose = UavPose(s.pose.X + sign * d * math.sin(rad),
                             s.pose.Y + sign * d * math.cos(rad), s.pose.Z)
            duration = d / self.v_horiz
            speed = self.v_horiz
        self._move(now, duration, speed)
        if s.battery <= 0:
            return "error", duration
        if word in ("forward", "down"):
            s.light_on = True
            self.service_pose = s.pose
        elif word == "back":
            s.light_on = False
        return "ok", duration


class MockEndpoint:
    """Serves one ``MockDrone`` on a UDP port, one datagram at a time."""

    def __init__(self, drone: MockDrone, port: int = 0, host: str = "127.0.0.1"):
        self.drone = drone
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.sock.settimeout(0.05)
        self.address = self.sock.getsockname()
        self._rng = random.Random(drone.faults.seed)
        self._dropped: dict[str, int] = {}
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._serve, name=f"mock-{drone.state.sn}",
                                        daemon=True)

    def start(self) -> "MockEndpoint":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2)
        self.sock.close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _should_drop(self, word: str) -> bool:
        faults = self.drone.faults
        budget = faults.drop_first.get(word, 0)
        if self._dropped.get(word, 0) < budget:
            self._dropped[word] = self._dropped.get(word, 0) + 1
            return True
        return faults.drop_prob > 0 and self._rng.random() < faults.drop_prob

    def _serve(self) -> None:
        clock = self.drone.clock
        while not self._stop.is_set():
            try:
                data, peer = self.sock.recvfrom(1024)
            except socket.timeout:
                continue
            except OSError:
                break
            text = data.decode("ascii", errors="replace").strip()
            reply, duration = self.drone.handle(text)
            word = text.split()[0].lower() if text.split() else ""
            extra = self.drone.faults.delay_ms.get(word, 0.0) / 1000
            clock.sleep(duration + extra)
            if self._should_drop(word):
                log.debug("%s: dropped reply to %r", self.drone.state.sn, text)
                continue
            try:
                self.sock.sendto(reply.encode("ascii"), peer)
            except OSError:
                break


def run_endpoint(drone: MockDrone, port: int = 0, host: str = "127.0.0.1") -> MockEndpoint:
    return MockEndpoint(drone, port, host).start()


def spawn_fleet(sn_map: dict[int, str], homes: dict[int, UavPose] | None = None, clock=None,
                faults: dict[int, FaultProfile] | FaultProfile | None = None,
                **drone_kw) -> list[MockEndpoint]:
    """Start one endpoint per numbered SN code; ``homes``/``faults`` are keyed by index."""
    clock = clock or SimClock()
    endpoints = []
    for idx, sn in sorted(sn_map.items()):
        home = (homes or {}).get(idx, UavPose(0.0, 0.0, 0.0))
        profile = faults.get(idx) if isinstance(faults, dict) else faults
        drone = MockDrone(sn, home, clock=clock, faults=profile, **drone_kw)
        endpoints.append(run_endpoint(drone))
    return endpoints
