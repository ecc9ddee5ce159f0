"""Domain types shared across the package and the scenario file loader.

Everything here is a frozen dataclass; coordinates are meters in a local
east/north ground frame with users implicitly on the ground (z = 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

PHASES = ("off", "deploy", "light", "back", "land")

DEFAULT_LIGHT_ANGLE_DEG = 30.0
DEFAULT_BATTERY_FULL_PCT = 100.0


class ScenarioError(ValueError):
    """Scenario content violates a domain invariant."""


class ScenarioParseError(ScenarioError):
    """Scenario file is not well-formed JSON or has the wrong shape."""


@dataclass(frozen=True)
class UserRequest:
    x: float
    y: float
    beta: int
    t_user: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ScenarioError(f"user position must be finite, got ({self.x}, {self.y})")
        if isinstance(self.beta, bool) or self.beta not in (1, 2, 3):
            raise ScenarioError(f"brightness level must be 1, 2 or 3, got {self.beta!r}")
        if not (math.isfinite(self.t_user) and self.t_user > 0):
            raise ScenarioError(f"t_user must be positive, got {self.t_user}")


@dataclass(frozen=True)
class BrightnessBand:
    beta: int
    h_min: float
    h_max: float

    def __post_init__(self):
        if not (0 < self.h_min < self.h_max) or not math.isfinite(self.h_max):
            raise ScenarioError(
                f"band {self.beta}: need 0 < h_min < h_max, got [{self.h_min}, {self.h_max}]")


DEFAULT_BANDS = (
    BrightnessBand(1, 1.0, 1.5),
    BrightnessBand(2, 1.5, 2.2),
    BrightnessBand(3, 2.2, 3.0),
)


@dataclass(frozen=True)
class UavPose:
    X: float
    Y: float
    Z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.X, self.Y, self.Z)):
            raise ScenarioError(f"pose must be finite, got ({self.X}, {self.Y}, {self.Z})")
        if self.Z < 0:
            raise ScenarioError(f"pose Z must be >= 0, got {self.Z}")


@dataclass(frozen=True)
class ServiceCycle:
    t_off: float
    t_deploy: float
    t_light: float
    t_back: float
    t_land: float

    def __post_init__(self):
        for name in ("t_off", "t_deploy", "t_light", "t_back", "t_land"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total(self) -> float:
        return self.t_off + self.t_deploy + self.t_light + self.t_back + self.t_land


@dataclass(frozen=True)
class TrajectorySegment:
    """One piece of the piecewise pose law.

    ``off``/``land`` move only along Z, ``light`` holds position and
    ``back`` is planar. ``deploy`` is planar except for the terminal
    height adjustment, which is a Z-only segment tagged ``deploy`` since
    it happens on arrival before lighting starts.
    """

    phase: str
    dX: float
    dY: float
    dZ: float
    speed: float
    duration: float

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.speed < 0 or self.duration < 0:
            raise ValueError("speed and duration must be >= 0")
        planar = self.dX != 0 or self.dY != 0
        if self.phase in ("off", "land") and planar:
            raise ValueError(f"{self.phase} segment must be Z-only")
        if self.phase == "back" and self.dZ != 0:
            raise ValueError("back segment must be planar")
        if self.phase == "deploy" and planar and self.dZ != 0:
            raise ValueError("deploy segment is either planar or Z-only")
        if self.phase == "light" and (planar or self.dZ != 0):
            raise ValueError("light segment must hover")


@dataclass(frozen=True)
class Scenario:
    users: tuple[UserRequest, ...]
    homes: tuple[UavPose, ...]
    light_angle: float = DEFAULT_LIGHT_ANGLE_DEG
    bands: tuple[BrightnessBand, ...] = DEFAULT_BANDS
    battery_full: float = DEFAULT_BATTERY_FULL_PCT
    # Optional override blocks, passed through to the energy model / planner.
    propulsion: Mapping[str, float] = field(default_factory=dict)
    energy: Mapping[str, float] = field(default_factory=dict)
    speeds: Mapping[str, float] = field(default_factory=dict)
    anneal: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.users:
            raise ScenarioError("scenario needs at least one user")
        if not self.homes:
            raise ScenarioError("scenario needs at least one UAV in the fleet")
        if not (0 < self.light_angle < 90):
            raise ScenarioError(f"light angle must be in (0, 90) degrees, got {self.light_angle}")
        if not (0 < self.battery_full <= 100):
            raise ScenarioError(f"battery_full_pct must be in (0, 100], got {self.battery_full}")
        levels = [b.beta for b in self.bands]
        if sorted(levels) != [1, 2, 3]:
            raise ScenarioError(f"need exactly one band per level 1..3, got {levels}")
        ordered = sorted(self.bands, key=lambda b: b.beta)
        for lo, hi in zip(ordered, ordered[1:]):
            if lo.h_max > hi.h_min:
                raise ScenarioError(f"bands {lo.beta} and {hi.beta} overlap or are out of order")
        object.__setattr__(self, "bands", tuple(ordered))

    @property
    def fleet_size(self) -> int:
        return len(self.homes)

    def band(self, beta: int) -> BrightnessBand:
        return self.bands[beta - 1]


def _num(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioParseError(f"{what} must be a number, got {value!r}")
    return float(value)


def _mapping(raw, key):
    block = raw.get(key, {})
    if not isinstance(block, dict):
        raise ScenarioParseError(f"'{key}' must be an object")
    return dict(block)


def scenario_from_dict(raw: Mapping[str, Any]) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioParseError("scenario root must be a JSON object")
    users_raw = raw.get("users")
    fleet_raw = raw.get("fleet")
    if not isinstance(users_raw, list):
        raise ScenarioParseError("'users' must be a list")
    if not isinstance(fleet_raw, list):
        raise ScenarioParseError("'fleet' must be a list")

    users = []
    for i, u in enumerate(users_raw):
        if not isinstance(u, dict):
            raise ScenarioParseError(f"users[{i}] must be an object")
        try:
            beta = u["beta"]
            if isinstance(beta, float) and beta.is_integer():
                beta = int(beta)
            users.append(UserRequest(_num(u["x"], f"users[{i}].x"), _num(u["y"], f"users[{i}].y"),
                                     beta, _num(u["t_user"], f"users[{i}].t_user")))
        except KeyError as exc:
            raise ScenarioParseError(f"users[{i}] missing field {exc}") from None

    homes = []
    for i, f in enumerate(fleet_raw):
        home = f.get("home") if isinstance(f, dict) else None
        if not isinstance(home, list) or len(home) not in (2, 3):
            raise ScenarioParseError(f"fleet[{i}].home must be [x, y] or [x, y, z]")
        coords = [_num(c, f"fleet[{i}].home") for c in home]
        homes.append(UavPose(*coords))

    bands = DEFAULT_BANDS
    if "bands" in raw:
        braw = raw["bands"]
        if not isinstance(braw, dict):
            raise ScenarioParseError("'bands' must be an object keyed by level")
        by_level = {b.beta: b for b in DEFAULT_BANDS}
        for key, rng in braw.items():
            if key not in ("1", "2", "3"):
                raise ScenarioError(f"unknown brightness level {key!r} in bands")
            if not isinstance(rng, list) or len(rng) != 2:
                raise ScenarioParseError(f"bands[{key}] must be [h_min, h_max]")
            by_level[int(key)] = BrightnessBand(int(key), _num(rng[0], "h_min"), _num(rng[1], "h_max"))
        bands = tuple(by_level[k] for k in (1, 2, 3))

    return Scenario(
        users=tuple(users),
        homes=tuple(homes),
        light_angle=_num(raw.get("light_angle_deg", DEFAULT_LIGHT_ANGLE_DEG), "light_angle_deg"),
        bands=bands,
        battery_full=_num(raw.get("battery_full_pct", DEFAULT_BATTERY_FULL_PCT), "battery_full_pct"),
        propulsion=_mapping(raw, "propulsion"),
        energy=_mapping(raw, "energy"),
        speeds=_mapping(raw, "speeds"),
        anneal=_mapping(raw, "anneal"),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    out = {
        "users": [{"x": u.x, "y": u.y, "beta": u.beta, "t_user": u.t_user} for u in scenario.users],
        "fleet": [{"home": [h.X, h.Y, h.Z]} for h in scenario.homes],
        "light_angle_deg": scenario.light_angle,
        "bands": {str(b.beta): [b.h_min, b.h_max] for b in scenario.bands},
        "battery_full_pct": scenario.battery_full,
    }
    for key in ("propulsion", "energy", "speeds", "anneal"):
        block = getattr(scenario, key)
        if block:
            out[key] = dict(block)
    return out


def load_scenario(path) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None
    return scenario_from_dict(raw)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")
