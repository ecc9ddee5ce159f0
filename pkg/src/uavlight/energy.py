"""Rotary-wing propulsion power, lighting drain and battery budgeting.

Flight power follows the standard rotary-wing model: blade profile,
induced and parasite terms, with hover cost ``P0 + P1``. Lighting drains
the battery linearly in time at ``mu`` percent per second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence

from .scenario import TrajectorySegment

LIGHT_MU_PCT_PER_S = 0.2
DEFAULT_CAPACITY_J = 15_500.0
RESERVE_FLOOR_PCT = 5.0


@dataclass(frozen=True)
class PropulsionParams:
    delta: float = 0.012  # profile drag coefficient
    rho: float = 1.225  # air density, kg/m^3
    s_rotor: float = 0.05  # rotor solidity
    G: float = 0.503  # rotor disk area, m^2
    Omega: float = 300.0  # blade angular velocity, rad/s
    R: float = 0.4  # rotor radius, m
    k_induced: float = 0.1
    W: float = 20.0  # weight, N
    U_tip: float | None = None  # defaults to Omega * R
    v0: float | None = None  # defaults to sqrt(W / (2 rho G))
    d0: float = 0.6  # fuselage drag ratio

    def __post_init__(self):
        if self.U_tip is None:
            object.__setattr__(self, "U_tip", self.Omega * self.R)
        if self.v0 is None:
            object.__setattr__(self, "v0", math.sqrt(self.W / (2 * self.rho * self.G)))
        for f in fields(self):
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"propulsion parameter {f.name} must be positive, got {value}")
        if abs(self.U_tip - self.Omega * self.R) > 1e-6 * self.U_tip:
            raise ValueError(
                f"U_tip={self.U_tip} inconsistent with Omega*R={self.Omega * self.R}")

    @classmethod
    def from_overrides(cls, overrides: Mapping[str, float] | None) -> "PropulsionParams":
        if not overrides:
            return cls()
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown propulsion parameters: {sorted(unknown)}")
        return cls(**overrides)


@dataclass(frozen=True)
class EnergyBreakdown:
    e_fly: float
    e_light: float
    e_total: float
    pct_fly: float
    pct_light: float
    pct_total: float
    t_light: float = 0.0
    # battery percent spent per second of lighting (hover + lamp)
    light_rate_pct: float = 0.0

    def __add__(self, other: "EnergyBreakdown") -> "EnergyBreakdown":
        return EnergyBreakdown(*(getattr(self, f.name) + getattr(other, f.name)
                                 for f in fields(self)))


@dataclass(frozen=True)
class Sufficiency:
    sufficient: bool
    serviceable_s: float


class InfeasibleMissionError(ValueError):
    """Even a zero-length lighting phase would break the battery reserve."""


def hover_powers(params: PropulsionParams) -> tuple[float, float]:
    p0 = params.delta / 8 * params.rho * params.s_rotor * params.G * params.Omega ** 3 * params.R ** 3
    p1 = (1 + params.k_induced) * params.W ** 1.5 / math.sqrt(2 * params.rho * params.G)
    return p0, p1


def propulsion_power(v: float, params: PropulsionParams) -> float:
    """Propulsion power in watts at forward speed ``v`` (m/s)."""
    if v < 0:
        raise ValueError("speed must be >= 0")
    p0, p1 = hover_powers(params)
    if v == 0:
        return p0 + p1
    blade = p0 * (1 + 3 * v * v / params.U_tip ** 2)
    # sqrt(1 + a^2) - a rewritten to avoid cancellation at high speed
    a = v * v / (2 * params.v0 ** 2)
    induced = p1 * math.sqrt(1.0 / (math.sqrt(1 + a * a) + a))
    parasite = 0.5 * params.d0 * params.rho * params.s_rotor * params.G * v ** 3
    return blade + induced + parasite


def flight_energy(segments: Iterable[TrajectorySegment], params: PropulsionParams) -> float:
    return sum(propulsion_power(s.speed, params) * s.duration for s in segments)


def lighting_energy(t_light: float, mu: float = LIGHT_MU_PCT_PER_S) -> float:
    """Lamp drain in battery percent."""
    if t_light < 0:
        raise ValueError("t_light must be >= 0")
    return mu * t_light


def mission_energy(segments: Sequence[TrajectorySegment], t_light: float,
                   params: PropulsionParams, capacity: float = DEFAULT_CAPACITY_J,
                   mu: float = LIGHT_MU_PCT_PER_S) -> EnergyBreakdown:
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    e_fly = flight_energy(segments, params)
    pct_fly = e_fly / capacity * 100
    pct_light = lighting_energy(t_light, mu)
    e_light = pct_light / 100 * capacity
    hovers_while_lighting = any(s.phase == "light" for s in segments)
    rate = mu
    if hovers_while_lighting:
        rate += sum(hover_powers(params)) / capacity * 100
    return EnergyBreakdown(e_fly, e_light, e_fly + e_light, pct_fly, pct_light,
                           pct_fly + pct_light, t_light, rate)


def return_reserve(segments: Sequence[TrajectorySegment], params: PropulsionParams,
                   capacity: float = DEFAULT_CAPACITY_J,
                   floor_pct: float = RESERVE_FLOOR_PCT) -> float:
    """Battery percent kept back: return and landing flight plus a floor."""
    back = [s for s in segments if s.phase in ("back", "land")]
    return flight_energy(back, params) / capacity * 100 + floor_pct


def sufficiency_check(breakdown: EnergyBreakdown, battery_now: float,
                      reserve: float) -> Sufficiency:
    if not (0 <= battery_now <= 100):
        raise ValueError("battery_now must be a percentage")
    if reserve < 0:
        raise ValueError("reserve must be >= 0")
    if battery_now - breakdown.pct_total >= reserve:
        return Sufficiency(True, breakdown.t_light)
    fixed = breakdown.pct_total - breakdown.light_rate_pct * breakdown.t_light
    slack = battery_now - reserve - fixed
    if slack < 0:
        raise InfeasibleMissionError(
            f"mission without lighting needs {fixed:.2f} %, only "
            f"{battery_now - reserve:.2f} % above reserve")
    if breakdown.light_rate_pct <= 0:
        return Sufficiency(False, 0.0)
    return Sufficiency(False, slack / breakdown.light_rate_pct)
