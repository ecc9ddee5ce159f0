"""Mission planning: from a scenario to per-UAV service cycles.

Pipeline per user cluster: anneal a deployment point, snap it to what the
command set can actually fly (whole degrees, whole centimeters), pick the
lowest covering height, lay out the five-phase cycle, budget energy and,
when one battery cannot carry the requested lighting, schedule a relief
UAV to take over at the same point.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

from . import energy as en
from .geometry import adjust_height, lighting_disk, max_distance, InfeasibleHeightError
from .placement import (AnnealConfig, AnnealTrace, anneal, exact_one_center,
                        partition_users)
from .scenario import (BrightnessBand, Scenario, ServiceCycle,
                       TrajectorySegment, UavPose, UserRequest)

log = logging.getLogger(__name__)

MIN_MOVE_CM = 20


class NoReliefAvailableError(RuntimeError):
    """A replacement UAV is needed but every UAV in the fleet is committed."""


@dataclass(frozen=True)
class PlannerConfig:
    v_horizontal: float = 1.0  # m/s
    v_vertical: float = 0.7  # m/s
    yaw_rate: float = 90.0  # deg/s
    takeoff_height: float = 0.8  # m, where a bare takeoff command leaves the UAV
    capacity_j: float = en.DEFAULT_CAPACITY_J
    mu: float = en.LIGHT_MU_PCT_PER_S
    reserve_floor: float = en.RESERVE_FLOOR_PCT
    handover_margin: float = 2.0  # s the relief arrives before the incumbent leaves
    guard_s: float = 1.0  # lighting seconds held back when truncating to battery
    propulsion: en.PropulsionParams = field(default_factory=en.PropulsionParams)
    anneal: AnnealConfig = field(default_factory=AnnealConfig)

    @classmethod
    def from_scenario(cls, scenario: Scenario, seed: int | None = None) -> "PlannerConfig":
        kw = {}
        speeds = dict(scenario.speeds)
        for key, name in (("horizontal", "v_horizontal"), ("vertical", "v_vertical"),
                          ("yaw_rate", "yaw_rate"), ("takeoff_height", "takeoff_height")):
            if key in speeds:
                kw[name] = float(speeds.pop(key))
        if speeds:
            raise ValueError(f"unknown speed settings: {sorted(speeds)}")
        energy = dict(scenario.energy)
        for key, name in (("capacity_j", "capacity_j"), ("mu_pct_per_s", "mu"),
                          ("reserve_floor_pct", "reserve_floor"),
                          ("handover_margin_s", "handover_margin"), ("guard_s", "guard_s")):
            if key in energy:
                kw[name] = float(energy.pop(key))
        if energy:
            raise ValueError(f"unknown energy settings: {sorted(energy)}")
        anneal_kw = dict(scenario.anneal)
        if seed is not None:
            anneal_kw["rng_seed"] = seed
        return cls(propulsion=en.PropulsionParams.from_overrides(scenario.propulsion),
                   anneal=AnnealConfig(**anneal_kw), **kw)


@dataclass(frozen=True)
class FlightParams:
    rotate_cw: float
    forward: float
    descend_or_climb: float
    t_light: float

    def __post_init__(self):
        if self.forward < 0:
            raise ValueError("forward distance must be >= 0")
        if not (0 <= self.rotate_cw < 360):
            raise ValueError("rotation must lie in [0, 360)")


@dataclass(frozen=True)
class UavPlan:
    uav_index: int
    role: str  # "primary" or "relief"
    users: tuple[int, ...]
    band: int
    home: UavPose
    target: tuple[float, float]
    transit_height: float
    service_height: float
    flight_params: FlightParams
    cycle: ServiceCycle
    segments: tuple[TrajectorySegment, ...]
    energy: en.EnergyBreakdown
    reserve_pct: float
    launch_time: float  # s after mission start
    unserved_s: float = 0.0

    @property
    def light_start(self) -> float:
        return self.launch_time + self.cycle.t_off + self.cycle.t_deploy

    @property
    def light_end(self) -> float:
        return self.light_start + self.cycle.t_light


@dataclass(frozen=True)
class Replacement:
    uav_index: int
    relief_uav_index: int
    handover_time: float


@dataclass(frozen=True)
class MissionPlan:
    uavs: tuple[UavPlan, ...]
    replacements: tuple[Replacement, ...]
    light_angle: float
    takeoff_height: float
    speeds: tuple[float, float, float]  # vertical, horizontal, yaw
    propulsion: en.PropulsionParams = field(default_factory=en.PropulsionParams)
    capacity_j: float = en.DEFAULT_CAPACITY_J
    mu: float = en.LIGHT_MU_PCT_PER_S
    traces: Mapping[int, AnnealTrace] = field(default_factory=dict, compare=False, repr=False)

    def uav(self, uav_index: int) -> UavPlan:
        for u in self.uavs:
            if u.uav_index == uav_index:
                return u
        raise KeyError(uav_index)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("traces")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _uav_from_dict(d: dict) -> UavPlan:
    return UavPlan(
        uav_index=d["uav_index"], role=d["role"], users=tuple(d["users"]), band=d["band"],
        home=UavPose(**d["home"]), target=tuple(d["target"]),
        transit_height=d["transit_height"], service_height=d["service_height"],
        flight_params=FlightParams(**d["flight_params"]), cycle=ServiceCycle(**d["cycle"]),
        segments=tuple(TrajectorySegment(**s) for s in d["segments"]),
        energy=en.EnergyBreakdown(**d["energy"]), reserve_pct=d["reserve_pct"],
        launch_time=d["launch_time"], unserved_s=d.get("unserved_s", 0.0))


def plan_from_dict(d: Mapping) -> MissionPlan:
    try:
        return MissionPlan(
            uavs=tuple(_uav_from_dict(u) for u in d["uavs"]),
            replacements=tuple(Replacement(**r) for r in d["replacements"]),
            light_angle=d["light_angle"], takeoff_height=d["takeoff_height"],
            speeds=tuple(d["speeds"]),
            propulsion=en.PropulsionParams(**d.get("propulsion", {})),
            capacity_j=d.get("capacity_j", en.DEFAULT_CAPACITY_J),
            mu=d.get("mu", en.LIGHT_MU_PCT_PER_S))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed mission plan: {exc}") from None


def load_plan(path) -> MissionPlan:
    with open(path) as fh:
        return plan_from_dict(json.load(fh))


# -- flight parameters and cycle -----------------------------------------

def bearing_cw(home: UavPose, target: tuple[float, float]) -> float:
    """Clockwise angle from +Y (takeoff heading) to the target, in [0, 360)."""
    dx, dy = target[0] - home.X, target[1] - home.Y
    if dx == 0 and dy == 0:
        return 0.0
    deg = math.degrees(math.atan2(dx, dy)) % 360.0
    return 0.0 if deg >= 360.0 else deg


def derive_flight_params(home: UavPose, target: tuple[float, float], service_height: float,
                         transit_height: float, t_light: float) -> FlightParams:
    if service_height <= 0 or transit_height <= 0:
        raise ValueError("heights must be positive")
    forward = math.hypot(target[0] - home.X, target[1] - home.Y)
    return FlightParams(bearing_cw(home, target), forward,
                        service_height - transit_height, t_light)


def build_cycle(forward: float, heights: tuple[float, float], speeds: tuple[float, float],
                t_light: float, heading: float = 0.0, yaw_rate: float = 90.0,
                rotate: float = 0.0) -> tuple[ServiceCycle, tuple[TrajectorySegment, ...]]:
    """Five-phase cycle and the segments that realize it.

    ``heights`` is (transit, service), ``speeds`` is (vertical, horizontal).
    Deploy covers the turn, the planar leg and the arrival height change.
    """
    transit, service = heights
    v_vert, v_horiz = speeds
    if v_vert <= 0 or v_horiz <= 0:
        raise ValueError("speeds must be positive")
    rad = math.radians(heading)
    dx, dy = forward * math.sin(rad), forward * math.cos(rad)
    adjust = service - transit
    t_turn = rotate / yaw_rate if rotate else 0.0
    t_leg = forward / v_horiz
    t_adjust = abs(adjust) / v_vert
    segs = [TrajectorySegment("off", 0.0, 0.0, transit, v_vert, transit / v_vert)]
    if t_turn:
        segs.append(TrajectorySegment("deploy", 0.0, 0.0, 0.0, 0.0, t_turn))
    if forward:
        segs.append(TrajectorySegment("deploy", dx, dy, 0.0, v_horiz, t_leg))
    if adjust:
        segs.append(TrajectorySegment("deploy", 0.0, 0.0, adjust, v_vert, t_adjust))
    segs.append(TrajectorySegment("light", 0.0, 0.0, 0.0, 0.0, t_light))
    if forward:
        segs.append(TrajectorySegment("back", -dx, -dy, 0.0, v_horiz, t_leg))
    segs.append(TrajectorySegment("land", 0.0, 0.0, -service, v_vert, service / v_vert))
    cycle = ServiceCycle(transit / v_vert, t_turn + t_leg + t_adjust, t_light, t_leg,
                         service / v_vert)
    return cycle, tuple(segs)


def replay(home: UavPose, segments: Sequence[TrajectorySegment]) -> list[tuple[float, float, float]]:
    """Pose after each segment, applying the piecewise pose law from ``home``."""
    X, Y, Z = home.X, home.Y, home.Z
    poses = []
    for s in segments:
        X, Y, Z = X + s.dX, Y + s.dY, Z + s.dZ
        poses.append((X, Y, Z))
    return poses


# -- snapping to the command grid ----------------------------------------

def _flown_target(home: UavPose, deg: int, cm: int) -> tuple[float, float]:
    rad = math.radians(deg)
    d = cm / 100
    return home.X + d * math.sin(rad), home.Y + d * math.cos(rad)


def _snap_target(home: UavPose, target: tuple[float, float],
                 users: Sequence[UserRequest]) -> tuple[int, int]:
    """Whole-degree heading and whole-cm distance closest to minimax optimal."""
    deg0 = round(bearing_cw(home, target))
    cm0 = round(math.hypot(target[0] - home.X, target[1] - home.Y) * 100)
    if cm0 >= MIN_MOVE_CM:
        distances = (cm0 - 1, cm0, cm0 + 1)
    else:
        distances = (0, MIN_MOVE_CM)
    best = None
    for deg in (deg0 - 1, deg0, deg0 + 1):
        for cm in distances:
            deg_n = 0 if cm == 0 else deg % 360
            X, Y = _flown_target(home, deg_n, cm)
            score = (max_distance(UavPose(X, Y, 0.0), users), abs(cm - cm0), abs(deg - deg0))
            if best is None or score < best[0]:
                best = (score, deg_n, cm)
    return best[1], best[2]


def _snap_climb(delta: float) -> int:
    cm = round(delta * 100)
    return 0 if abs(cm) < MIN_MOVE_CM else cm


# -- planning ------------------------------------------------------------

def _layout(home: UavPose, uav_index: int, role: str, cluster_users: tuple[int, ...],
            band: BrightnessBand, target: tuple[float, float], members: Sequence[UserRequest],
            t_light: float, launch: float, scenario: Scenario, cfg: PlannerConfig) -> UavPlan:
    deg, cm = _snap_target(home, target, members)
    flown = _flown_target(home, deg, cm)
    d_max = max_distance(UavPose(flown[0], flown[1], 0.0), members)
    h = adjust_height(scenario.light_angle, d_max, band)
    transit = cfg.takeoff_height + _snap_climb(band.h_max - cfg.takeoff_height) / 100
    # round the descent down so the disk never shrinks below d_max
    down_cm = math.floor((transit - h) * 100 + 1e-9)
    if abs(down_cm) < MIN_MOVE_CM:
        down_cm = 0 if down_cm >= 0 else -MIN_MOVE_CM
    service = transit - down_cm / 100
    params = derive_flight_params(home, flown, service, transit, t_light)
    params = replace(params, rotate_cw=float(deg), forward=cm / 100)
    cycle, segs = build_cycle(params.forward, (transit, service), (cfg.v_vertical, cfg.v_horizontal),
                              t_light, heading=deg, yaw_rate=cfg.yaw_rate, rotate=deg)
    breakdown = en.mission_energy(segs, t_light, cfg.propulsion, cfg.capacity_j, cfg.mu)
    reserve = en.return_reserve(segs, cfg.propulsion, cfg.capacity_j, cfg.reserve_floor)
    return UavPlan(uav_index, role, cluster_users, band.beta, home, flown, transit, service,
                   params, cycle, segs, breakdown, reserve, launch)


def _with_light(p: UavPlan, t_light: float, scenario: Scenario, cfg: PlannerConfig,
                unserved: float) -> UavPlan:
    cycle, segs = build_cycle(p.flight_params.forward, (p.transit_height, p.service_height),
                              (cfg.v_vertical, cfg.v_horizontal), t_light,
                              heading=p.flight_params.rotate_cw, yaw_rate=cfg.yaw_rate,
                              rotate=p.flight_params.rotate_cw)
    breakdown = en.mission_energy(segs, t_light, cfg.propulsion, cfg.capacity_j, cfg.mu)
    return replace(p, flight_params=replace(p.flight_params, t_light=t_light), cycle=cycle,
                   segments=segs, energy=breakdown, unserved_s=unserved)


def _fit_battery(p: UavPlan, scenario: Scenario, cfg: PlannerConfig) -> tuple[UavPlan, bool]:
    """Truncate lighting to what the battery allows; returns (plan, truncated)."""
    verdict = en.sufficiency_check(p.energy, scenario.battery_full, p.reserve_pct)
    if verdict.sufficient:
        return p, False
    served = max(0.0, math.floor((verdict.serviceable_s - cfg.guard_s) * 100) / 100)
    return _with_light(p, served, scenario, cfg, p.flight_params.t_light - served), True


def plan_mission(scenario: Scenario, cfg: PlannerConfig | None = None) -> MissionPlan:
    cfg = cfg or PlannerConfig.from_scenario(scenario)
    assignment = partition_users(scenario)
    committed = {c.uav for c in assignment.clusters}
    uavs: list[UavPlan] = []
    replacements: list[Replacement] = []
    traces: dict[int, AnnealTrace] = {}

    for cluster in assignment.clusters:
        members = [scenario.users[i] for i in cluster.users]
        trace = anneal(members, cfg.anneal)
        traces[cluster.uav] = trace
        target = trace.final_point
        home = scenario.homes[cluster.uav]
        t_need = max(u.t_user for u in members)
        try:
            primary = _layout(home, cluster.uav, "primary", cluster.users, cluster.band, target,
                              members, t_need, 0.0, scenario, cfg)
        except InfeasibleHeightError:
            # annealed point lands just outside the band's reach; fall back to the exact center
            target, _ = exact_one_center(members)
            log.warning("UAV %d: annealed point infeasible, using exact 1-center", cluster.uav)
            primary = _layout(home, cluster.uav, "primary", cluster.users, cluster.band, target,
                              members, t_need, 0.0, scenario, cfg)
        primary, truncated = _fit_battery(primary, scenario, cfg)
        uavs.append(primary)
        if not truncated:
            continue

        free = [k for k in range(scenario.fleet_size) if k not in committed]
        if not free:
            raise NoReliefAvailableError(
                f"UAV {cluster.uav} can light {primary.cycle.t_light:.1f} s of {t_need:.1f} s "
                "and no spare UAV is left")
        relief_idx = min(free, key=lambda k: (math.hypot(scenario.homes[k].X - target[0],
                                                         scenario.homes[k].Y - target[1]), k))
        committed.add(relief_idx)
        handover = primary.light_end
        probe = _layout(scenario.homes[relief_idx], relief_idx, "relief", cluster.users,
                        cluster.band, target, members, 0.0, 0.0, scenario, cfg)
        lead = probe.cycle.t_off + probe.cycle.t_deploy
        launch = max(0.0, handover - lead - cfg.handover_margin)
        overlap = handover - (launch + lead)
        relief = _with_light(replace(probe, launch_time=launch), overlap + primary.unserved_s,
                             scenario, cfg, 0.0)
        relief, _ = _fit_battery(relief, scenario, cfg)
        if overlap < 0:
            log.warning("UAV %d relief arrives %.1f s after handover", relief_idx, -overlap)
        if relief.unserved_s > 0:
            log.warning("UAV %d relief still leaves %.1f s unlit; re-plan for another relief",
                        relief_idx, relief.unserved_s)
        uavs.append(relief)
        replacements.append(Replacement(cluster.uav, relief_idx, handover))

    return MissionPlan(tuple(uavs), tuple(replacements), scenario.light_angle, cfg.takeoff_height,
                       (cfg.v_vertical, cfg.v_horizontal, cfg.yaw_rate),
                       cfg.propulsion, cfg.capacity_j, cfg.mu, traces)


def lighting_radius(p: UavPlan, light_angle: float) -> float:
    return lighting_disk(UavPose(p.target[0], p.target[1], p.service_height), light_angle).radius
