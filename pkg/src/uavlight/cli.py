"""Command line: ``uavlight plan|compile|fly|report``.

Exit codes: 0 success, 2 bad input, 3 mission aborted in flight.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import report
from .flighttext import FlightTextError, compile_plan, parse
from .link import FlightLog, LogParseError, RetryPolicy
from .mockdrone import FaultProfile
from .placement import FleetExhaustedError
from .planner import NoReliefAvailableError, PlannerConfig, load_plan, plan_mission
from .scenario import ScenarioError, load_scenario
from .sim import fly_mock

EXIT_OK, EXIT_INPUT, EXIT_ABORT = 0, 2, 3
DEFAULT_SEED = 0


class InputError(Exception):
    pass


def cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    cfg = PlannerConfig.from_scenario(scenario, seed=args.seed)
    plan = plan_mission(scenario, cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "plan.json").write_text(plan.to_json())
    for uav, trace in sorted(plan.traces.items()):
        (out / f"trace_{uav}.csv").write_text(trace.to_csv())
        (out / f"trace_{uav}.svg").write_text(report.trace_svg(trace))
    (out / "map2d.svg").write_text(report.map2d_svg(scenario, plan))
    print(f"planned {len(plan.uavs)} UAV(s), {len(plan.replacements)} relief(s) -> {out}")
    return EXIT_OK


def cmd_compile(args) -> int:
    plan = load_plan(args.plan)
    sns = [s.strip() for s in args.sn.split(",") if s.strip()]
    text = compile_plan(plan, sns, battery_floor=args.battery_floor)
    parse(text.raw)  # refuse to write anything the parser would reject
    Path(args.output).write_text(text.raw)
    print(f"wrote {len(text.commands)} commands -> {args.output}")
    return EXIT_OK


def _faults(path: str | None) -> FaultProfile | dict[int, FaultProfile] | None:
    """One profile for every drone, or ``{"1": {...}, "2": {...}}`` keyed by drone number."""
    if path is None:
        return None
    raw = json.loads(Path(path).read_text())
    if raw and all(k.isdigit() for k in raw):
        return {int(k): FaultProfile.from_dict(v) for k, v in raw.items()}
    return FaultProfile.from_dict(raw)


def cmd_fly(args) -> int:
    text = parse(Path(args.flight_text).read_text())
    if args.mock != text.drone_count:
        raise InputError(f"flight text numbers {text.drone_count} drones, --mock gave {args.mock}")
    plan = load_plan(args.plan) if args.plan else None
    result = fly_mock(text, plan, speedup=args.speedup, faults=_faults(args.faults),
                      policy=RetryPolicy(max_retries=args.max_retries),
                      discovery_timeout=args.discovery_timeout)
    result.log.write(args.output)
    print(f"{len(result.log.entries)} log entries -> {args.output}")
    if result.error is not None:
        print(f"mission aborted: {result.error}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_report(args) -> int:
    flight_log = FlightLog.read(args.flight_log)
    plan = load_plan(args.plan)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    series = report.battery_series(flight_log, plan)
    (out / "battery.csv").write_text(report.battery_csv(series))
    if series:
        (out / "battery.svg").write_text(report.battery_svg(series))
    summary = report.timeline_summary(flight_log, plan)
    (out / "timeline.json").write_text(json.dumps(summary, indent=2) + "\n")
    for drone, d in summary["drones"].items():
        print(f"UAV {drone}: takeoff {d['takeoff_s']} s, land {d['land_s']} s, "
              f"retries {d['retries']}, final battery {d['final_battery_pct']} %")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uavlight", description="Emergency lighting UAV planner "
                                 "and mock flight controller.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="place UAVs and lay out their service cycles")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("compile", help="turn plan.json into flight text")
    p.add_argument("plan")
    p.add_argument("--sn", required=True, help="comma-separated SN codes, drone 1 first")
    p.add_argument("--battery-floor", type=int, default=5)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("fly", help="fly a flight text against mock drones")
    p.add_argument("flight_text")
    p.add_argument("--mock", type=int, required=True, help="number of mock drones to spawn")
    p.add_argument("--faults", help="fault profile JSON")
    p.add_argument("--plan", help="plan.json, for home positions and energy settings")
    p.add_argument("--speedup", type=float, default=20.0, help="simulated seconds per wall second")
    p.add_argument("--max-retries", type=int, default=RetryPolicy.max_retries)
    p.add_argument("--discovery-timeout", type=float, default=10.0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_fly)

    p = sub.add_parser("report", help="battery chart and timeline from a flight log")
    p.add_argument("flight_log")
    p.add_argument("plan")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, InputError, ScenarioError, FlightTextError, LogParseError,
            FleetExhaustedError, NoReliefAvailableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
