"""Fly a flight text against a local swarm of mock drones."""

from __future__ import annotations

from dataclasses import dataclass

from .flighttext import FlightText
from .link import Controller, DiscoveryTimeout, FlightLog, MissionAborted, PreflightError, \
    RetryPolicy
from .mockdrone import FaultProfile, MockDrone, spawn_fleet
from .planner import MissionPlan
from .simclock import SimClock


@dataclass
class SimResult:
    log: FlightLog
    drones: dict[int, MockDrone]  # by flight-text index
    error: Exception | None = None

    @property
    def completed(self) -> bool:
        return self.error is None


def fly_mock(text: FlightText, plan: MissionPlan | None = None, *, speedup: float = 20.0,
             faults: FaultProfile | dict[int, FaultProfile] | None = None,
             policy: RetryPolicy | None = None, discovery_timeout: float = 10.0,
             battery: dict[int, float] | None = None) -> SimResult:
    """Spawn one mock per SN in ``text``, fly it and tear the swarm down.

    With a plan the mocks start at the plan's homes and share its energy
    settings; drone ``i`` is the plan's i-th UAV, as in ``compile_plan``.
    Aborts are returned in ``SimResult.error`` rather than raised.
    """
    clock = SimClock(speedup)
    homes, kw = None, {}
    if plan is not None:
        homes = {i: p.home for i, p in enumerate(plan.uavs, start=1)}
        kw = dict(params=plan.propulsion, capacity_j=plan.capacity_j, mu=plan.mu,
                  speeds=plan.speeds, takeoff_height=plan.takeoff_height)
    endpoints = spawn_fleet(text.sn_map, homes, clock, faults, **kw)
    drones = {i: e.drone for i, e in zip(sorted(text.sn_map), endpoints)}
    for i, pct in (battery or {}).items():
        drones[i].state.battery = pct
    error = None
    try:
        with Controller(policy, clock) as ctl:
            try:
                flight_log = ctl.fly(text, [e.address for e in endpoints], discovery_timeout)
            except MissionAborted as exc:
                flight_log, error = exc.flight_log, exc
            except (DiscoveryTimeout, PreflightError) as exc:
                flight_log, error = ctl.log, exc
    finally:
        for e in endpoints:
            e.stop()
    return SimResult(flight_log, drones, error)
