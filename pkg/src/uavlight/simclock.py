"""Scaled wall clock shared by the controller and the mock drones.

With ``speedup=20`` one simulated second passes in 50 ms of wall time, so
minute-long missions run in a few seconds while every timeout, motion
delay and battery drain stays consistent in simulated seconds.
"""

from __future__ import annotations

import time


class SimClock:
    def __init__(self, speedup: float = 1.0):
        if speedup <= 0:
            raise ValueError("speedup must be positive")
        self.speedup = speedup
        self._t0 = time.monotonic()

    def now(self) -> float:
        """Simulated seconds since the clock was created."""
        return (time.monotonic() - self._t0) * self.speedup

    def wall(self, sim_seconds: float) -> float:
        return max(0.0, sim_seconds) / self.speedup

    def sleep(self, sim_seconds: float) -> None:
        if sim_seconds > 0:
            time.sleep(sim_seconds / self.speedup)


class ManualClock:
    """Clock that only moves when told to; for deterministic unit tests."""

    speedup = 1.0

    def __init__(self, start: float = 0.0):
        self.t = start

    def now(self) -> float:
        return self.t

    def wall(self, sim_seconds: float) -> float:
        return 0.0

    def advance(self, dt: float) -> None:
        self.t += dt

    def sleep(self, sim_seconds: float) -> None:
        self.advance(max(0.0, sim_seconds))
