"""Flight text: the line-oriented command program flown by the controller.

A text has a fixed preamble (scan, correct_ip, SN numbering, battery
query, takeoff) followed by a body of per-drone moves, ``sync`` holds and
the ``battery_check`` guard. Addressing uses ``i>`` for drone ``i`` and
``*>`` for every drone. Distances are centimeters, angles whole degrees.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Sequence

from .planner import MissionPlan, UavPlan

ALL = "*"
MOTION_OPS = ("cw", "forward", "back", "down", "up")
MOVE_RANGE_CM = (20, 500)
CW_RANGE_DEG = (1, 360)
PREAMBLE_OPS = ("scan", "correct_ip", "sn_map", "battery?", "takeoff")


class FlightTextError(ValueError):
    def __init__(self, message: str, line: int | None = None, token: str | None = None):
        self.line = line
        self.token = token
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class FlightTextSyntaxError(FlightTextError):
    pass


class FlightTextRangeError(FlightTextError):
    pass


class FlightTextOrderError(FlightTextError):
    pass


class UnknownIndexError(FlightTextError):
    pass


class CompileWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Command:
    op: str
    target: int | str | None = None  # drone index, ALL, or None for global commands
    arg: float | None = None
    sn_map: tuple[tuple[int, str], ...] = ()

    def render(self) -> str:
        if self.op == "scan":
            return f"scan {int(self.arg)}"
        if self.op == "correct_ip":
            return "correct_ip"
        if self.op == "sn_map":
            return ",".join(f"{i}={sn}" for i, sn in self.sn_map)
        if self.op in ("battery?", "takeoff", "land"):
            return f"{self.target}>{self.op}"
        if self.op in MOTION_OPS:
            return f"{self.target}>{self.op} {int(self.arg)}"
        if self.op == "sync":
            return f"sync {format_seconds(self.arg)}"
        if self.op == "battery_check":
            return f"battery_check {int(self.arg)}"
        raise ValueError(f"unknown op {self.op!r}")

    @property
    def wire(self) -> str:
        """Text sent to the drone for per-drone commands."""
        if self.op in MOTION_OPS:
            return f"{self.op} {int(self.arg)}"
        return self.op


@dataclass(frozen=True)
class FlightText:
    preamble: tuple[Command, ...]
    body: tuple[Command, ...]
    raw: str

    @property
    def commands(self) -> tuple[Command, ...]:
        return self.preamble + self.body

    @property
    def drone_count(self) -> int:
        return int(self.preamble[0].arg)

    @property
    def sn_map(self) -> dict[int, str]:
        return dict(self.preamble[2].sn_map)

    def battery_threshold(self, default: int = 5) -> int:
        for c in self.body:
            if c.op == "battery_check":
                return int(c.arg)
        return default


def format_seconds(sec: float) -> str:
    text = f"{sec:.2f}".rstrip("0").rstrip(".")
    return text or "0"


def render(commands: Sequence[Command]) -> str:
    return "".join(c.render() + "\n" for c in commands)


# -- parsing -------------------------------------------------------------

_RE_SCAN = re.compile(r"scan\s*(\S+)$")
_RE_TARGETED = re.compile(r"(\*|\S+?)\s*>\s*(\S+)(?:\s+(\S+))?$")
_RE_SN_PAIR = re.compile(r"\s*(\d+)\s*=\s*([A-Za-z0-9]+)\s*$")
_RE_INT = re.compile(r"\d+$")
_RE_SECONDS = re.compile(r"\d+(\.\d+)?$")


def _int_arg(token: str | None, lineno: int, what: str) -> int:
    if token is None or not _RE_INT.match(token):
        raise FlightTextSyntaxError(f"expected integer {what}, got {token!r}", lineno, token)
    return int(token)


def _parse_line(line: str, lineno: int) -> Command:
    low = line.lower()
    m = _RE_SCAN.match(low)
    if m:
        n = _int_arg(m.group(1), lineno, "drone count")
        if n < 1:
            raise FlightTextRangeError("scan needs at least one drone", lineno, m.group(1))
        return Command("scan", arg=n)
    if low == "correct_ip":
        return Command("correct_ip")
    if low.startswith("sync"):
        parts = line.split()
        if len(parts) != 2 or parts[0].lower() != "sync" or not _RE_SECONDS.match(parts[1]):
            raise FlightTextSyntaxError("expected 'sync <seconds>'", lineno,
                                        parts[1] if len(parts) > 1 else line)
        return Command("sync", arg=float(parts[1]))
    if low.startswith("battery_check"):
        parts = line.split()
        if len(parts) != 2 or parts[0].lower() != "battery_check":
            raise FlightTextSyntaxError("expected 'battery_check <pct>'", lineno, line)
        pct = _int_arg(parts[1], lineno, "battery percent")
        if not (1 <= pct <= 100):
            raise FlightTextRangeError(f"battery_check {pct} outside [1, 100]", lineno, parts[1])
        return Command("battery_check", arg=pct)
    if "=" in line and ">" not in line:
        pairs = []
        for chunk in line.split(","):
            m = _RE_SN_PAIR.match(chunk)
            if not m:
                raise FlightTextSyntaxError("malformed SN mapping", lineno, chunk.strip())
            pairs.append((int(m.group(1)), m.group(2)))
        return Command("sn_map", sn_map=tuple(pairs))
    m = _RE_TARGETED.match(line)
    if not m:
        raise FlightTextSyntaxError("unrecognized command", lineno, line.split()[0])
    who, op, value = m.group(1), m.group(2).lower(), m.group(3)
    if who == ALL:
        target: int | str = ALL
    elif _RE_INT.match(who) and int(who) >= 1:
        target = int(who)
    else:
        raise FlightTextSyntaxError("drone index must be '*' or a positive integer", lineno, who)
    if op in ("battery?", "takeoff", "land"):
        if value is not None:
            raise FlightTextSyntaxError(f"{op} takes no argument", lineno, value)
        return Command(op, target)
    if op in MOTION_OPS:
        if target == ALL:
            raise FlightTextSyntaxError(f"{op} needs a single drone index", lineno, who)
        amount = _int_arg(value, lineno, "cw angle" if op == "cw" else "distance")
        lo, hi = CW_RANGE_DEG if op == "cw" else MOVE_RANGE_CM
        if not (lo <= amount <= hi):
            raise FlightTextRangeError(f"{op} {amount} outside [{lo}, {hi}]", lineno, value)
        return Command(op, target, amount)
    raise FlightTextSyntaxError(f"unknown command {op!r}", lineno, op)


def _validate(commands: list[tuple[int, Command]]) -> tuple[tuple[Command, ...], tuple[Command, ...]]:
    if len(commands) < len(PREAMBLE_OPS):
        last = commands[-1][0] if commands else 0
        raise FlightTextOrderError("preamble incomplete", last)
    pre = commands[: len(PREAMBLE_OPS)]
    for (lineno, cmd), op in zip(pre, PREAMBLE_OPS):
        if cmd.op != op:
            raise FlightTextOrderError(f"expected {op} in preamble, found {cmd.op}", lineno,
                                       cmd.render())
        if op in ("battery?", "takeoff") and cmd.target != ALL:
            raise FlightTextOrderError(f"preamble {op} must address every drone", lineno,
                                       cmd.render())
    n = int(pre[0][1].arg)
    lineno, snm = pre[2]
    indices = [i for i, _ in snm.sn_map]
    if sorted(indices) != list(range(1, n + 1)):
        raise FlightTextOrderError(f"SN mapping must number drones 1..{n}", lineno, snm.render())
    if len({sn for _, sn in snm.sn_map}) != n:
        raise FlightTextOrderError("duplicate SN code in mapping", lineno, snm.render())
    for lineno, cmd in commands[len(PREAMBLE_OPS):]:
        if cmd.op in ("scan", "correct_ip", "sn_map"):
            raise FlightTextOrderError(f"{cmd.op} only allowed in the preamble", lineno,
                                       cmd.render())
    for lineno, cmd in commands:
        if isinstance(cmd.target, int) and cmd.target > n:
            raise UnknownIndexError(f"drone {cmd.target} not among the {n} scanned", lineno,
                                    str(cmd.target))
    return tuple(c for _, c in pre), tuple(c for _, c in commands[len(PREAMBLE_OPS):])


def parse(text: str) -> FlightText:
    commands = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        commands.append((lineno, _parse_line(line, lineno)))
    preamble, body = _validate(commands)
    return FlightText(preamble, body, text)


# -- compiling -----------------------------------------------------------

def segment_cm(total_cm: int) -> list[int]:
    """Split a distance into legal move commands, conserving the total."""
    lo, hi = MOVE_RANGE_CM
    if total_cm < 0:
        raise ValueError("distance must be >= 0")
    if total_cm == 0:
        return []
    if total_cm < lo:
        warnings.warn(f"move of {total_cm} cm is below the {lo} cm minimum; dropped",
                      CompileWarning, stacklevel=2)
        return []
    full, rest = divmod(total_cm, hi)
    chunks = [hi] * full
    if rest >= lo:
        chunks.append(rest)
    elif rest:
        # fold a short tail into the last full chunk, then split that evenly
        merged = chunks.pop() + rest
        chunks += [merged - merged // 2, merged // 2]
    return chunks


def _to_cm(meters: float) -> int:
    return int(round(meters * 100))


def _positioning(idx: int, p: UavPlan, plan: MissionPlan, with_takeoff: bool) -> list[list[Command]]:
    """Per-round commands for climbing out and reaching the service point."""
    rounds: list[list[Command]] = []
    if with_takeoff:
        rounds.append([Command("takeoff", idx)])
    climb = _to_cm(p.transit_height - plan.takeoff_height)
    op = "up" if climb > 0 else "down"
    for cm in segment_cm(abs(climb)):
        rounds.append([Command(op, idx, cm)])
    deg = int(round(p.flight_params.rotate_cw)) % 360
    if deg:
        rounds.append([Command("cw", idx, deg)])
    for cm in segment_cm(_to_cm(p.flight_params.forward)):
        rounds.append([Command("forward", idx, cm)])
    adjust = _to_cm(p.flight_params.descend_or_climb)
    op = "up" if adjust > 0 else "down"
    for cm in segment_cm(abs(adjust)):
        rounds.append([Command(op, idx, cm)])
    return rounds


def _homecoming(idx: int, p: UavPlan) -> list[list[Command]]:
    rounds = [[Command("back", idx, cm)] for cm in segment_cm(_to_cm(p.flight_params.forward))]
    rounds.append([Command("land", idx)])
    return rounds


def _interleave(per_drone: list[list[list[Command]]]) -> list[Command]:
    """Round-robin so consecutive lines address distinct drones."""
    out = []
    depth = max((len(r) for r in per_drone), default=0)
    for k in range(depth):
        for rounds in per_drone:
            if k < len(rounds):
                out += rounds[k]
    return out


def _round_time(rounds: list[list[list[Command]]], plan: MissionPlan,
                land_s: dict[int, float]) -> float:
    v_vert, v_horiz, yaw = plan.speeds
    total = 0.0
    for k in range(max((len(r) for r in rounds), default=0)):
        longest = 0.0
        for drone_rounds in rounds:
            if k >= len(drone_rounds):
                continue
            for c in drone_rounds[k]:
                if c.op == "takeoff":
                    longest = max(longest, plan.takeoff_height / v_vert)
                elif c.op in ("up", "down"):
                    longest = max(longest, c.arg / 100 / v_vert)
                elif c.op in ("forward", "back"):
                    longest = max(longest, c.arg / 100 / v_horiz)
                elif c.op == "cw":
                    longest = max(longest, c.arg / yaw)
                elif c.op == "land":
                    longest = max(longest, land_s[c.target])
        total += longest
    return total


def compile_plan(plan: MissionPlan, sn_codes: Sequence[str], battery_floor: int = 5) -> FlightText:
    """Flight text for ``plan``; drone ``i`` is the i-th UAV plan and ``sn_codes[i-1]``."""
    n = len(plan.uavs)
    if len(sn_codes) != n:
        raise ValueError(f"plan flies {n} UAVs but {len(sn_codes)} SN codes were given")
    index = {p.uav_index: i for i, p in enumerate(plan.uavs, start=1)}
    land_s = {index[p.uav_index]: p.cycle.t_land for p in plan.uavs}
    preamble = [Command("scan", arg=n), Command("correct_ip"),
                Command("sn_map", sn_map=tuple((i, sn) for i, sn in enumerate(sn_codes, 1))),
                Command("battery?", ALL), Command("takeoff", ALL)]
    body = [Command("battery_check", arg=battery_floor)]

    primaries = [p for p in plan.uavs if p.role == "primary"]
    reliefs = [p for p in plan.uavs if p.role == "relief"]
    rounds = [_positioning(index[p.uav_index], p, plan, with_takeoff=False) for p in primaries]
    body += _interleave(rounds)
    cursor = plan.takeoff_height / plan.speeds[0] + _round_time(rounds, plan, land_s)

    # timed events after everyone is on station: relief launches and returns home
    events: list[tuple[float, int, UavPlan]] = []
    for p in primaries:
        events.append((p.light_end, 1, p))
    for p in reliefs:
        events.append((p.launch_time, 0, p))
        events.append((p.light_end, 1, p))
    events.sort(key=lambda e: (round(e[0], 6), e[1], index[e[2].uav_index]))

    i = 0
    while i < len(events):
        t, kind, _ = events[i]
        group = [e[2] for e in events[i:] if abs(e[0] - t) < 1e-6 and e[1] == kind]
        i += len(group)
        wait = round(t - cursor, 2)
        if wait > 0:
            body.append(Command("sync", arg=wait))
            cursor = t
        if kind == 0:
            rounds = [_positioning(index[p.uav_index], p, plan, with_takeoff=True) for p in group]
        else:
            rounds = [_homecoming(index[p.uav_index], p) for p in group]
        body += _interleave(rounds)
        cursor = max(cursor, t) + _round_time(rounds, plan, land_s)

    cmds = preamble + body
    return FlightText(tuple(preamble), tuple(body), render(cmds))
