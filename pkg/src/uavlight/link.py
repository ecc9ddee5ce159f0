"""Flight control over the text-over-UDP drone link.

``Controller`` owns one UDP socket for the whole swarm. It finds drones,
numbers them by SN code, then walks the flight text in order. Runs of
commands for distinct drones form a dispatch block: every command in the
block is sent first, then all replies are awaited together. A missing
or bad reply is re-sent up to ``RetryPolicy.max_retries`` times. Every
datagram and decision lands in a ``FlightLog``.
"""

from __future__ import annotations

import enum
import logging
import queue
import re
import socket
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .flighttext import ALL, MOTION_OPS, Command, FlightText
from .simclock import SimClock

log = logging.getLogger(__name__)

TELLO_PORT = 8889


class LinkState(enum.Enum):
    DISCOVERED = "discovered"
    NUMBERED = "numbered"
    AIRBORNE = "airborne"
    LANDED = "landed"
    LOST = "lost"


_TRANSITIONS = {
    LinkState.DISCOVERED: {LinkState.NUMBERED},
    LinkState.NUMBERED: {LinkState.AIRBORNE},
    LinkState.AIRBORNE: {LinkState.LANDED},
    LinkState.LANDED: set(),
    LinkState.LOST: set(),
}


class DiscoveryTimeout(RuntimeError):
    def __init__(self, wanted: int, found: int):
        self.wanted = wanted
        self.found = found
        super().__init__(f"found {found} of {wanted} drones before timeout")


class UnknownSnError(ValueError):
    pass


class UnmappedDroneError(ValueError):
    pass


class LinkLost(RuntimeError):
    def __init__(self, link: "DroneLink", command: str):
        self.link = link
        self.command = command
        super().__init__(f"drone {link.label} gave no valid reply to {command!r}")


class PreflightError(RuntimeError):
    pass


class MissionAborted(RuntimeError):
    def __init__(self, reason: str, flight_log: "FlightLog"):
        self.flight_log = flight_log
        super().__init__(reason)


@dataclass
class RetryPolicy:
    max_retries: int = 3
    motion_timeout: float = 7.0
    takeoff_land_timeout: float = 10.0
    query_timeout: float = 3.0

    def timeout_for(self, wire: str) -> float:
        word = wire.split()[0] if wire.split() else ""
        if word in ("takeoff", "land"):
            return self.takeoff_land_timeout
        if word in MOTION_OPS or word == "ccw":
            return self.motion_timeout
        return self.query_timeout


@dataclass
class DroneLink:
    sn: str
    address: tuple[str, int]
    index: int | None = None
    last_battery: int | None = None
    state: LinkState = LinkState.DISCOVERED
    forced_down: bool = False
    pending: str | None = field(default=None, repr=False)

    @property
    def label(self) -> str:
        return str(self.index) if self.index is not None else "-"

    def move_to(self, new: LinkState) -> None:
        if new == self.state:
            return
        if new != LinkState.LOST and new not in _TRANSITIONS[self.state]:
            raise RuntimeError(f"drone {self.label}: illegal transition {self.state.value} -> {new.value}")
        self.state = new


# -- flight log ------------------------------------------------------------

_LOG_LINE = re.compile(r"(\d+) (\S+) (SENT|RECV|EVENT) (.*?)(?: battery=(\d+))?$")


@dataclass(frozen=True)
class LogEntry:
    ms: int
    drone: str
    direction: str
    text: str
    battery: int | None = None

    def format(self) -> str:
        tail = f" battery={self.battery}" if self.battery is not None else ""
        return f"{self.ms} {self.drone} {self.direction} {self.text}{tail}"


class LogParseError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class FlightLog:
    def __init__(self, clock=None, entries: Iterable[LogEntry] = ()):
        self.clock = clock
        self.entries: list[LogEntry] = list(entries)
        self._lock = threading.Lock()
        self._t0: float | None = None

    def start(self) -> None:
        if self._t0 is None:
            self._t0 = self.clock.now()

    def add(self, drone: str, direction: str, text: str, battery: int | None = None) -> LogEntry:
        with self._lock:
            self.start()
            ms = int((self.clock.now() - self._t0) * 1000)
            if self.entries:
                ms = max(ms, self.entries[-1].ms)
            entry = LogEntry(ms, drone, direction, text, battery)
            self.entries.append(entry)
        return entry

    def event(self, drone: str, text: str) -> None:
        self.add(drone, "EVENT", text)

    def to_text(self) -> str:
        return "".join(e.format() + "\n" for e in self.entries)

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def parse(cls, text: str) -> "FlightLog":
        entries = []
        for n, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            m = _LOG_LINE.match(line.rstrip())
            if not m:
                raise LogParseError(f"malformed log entry {line!r}", n)
            entry = LogEntry(int(m.group(1)), m.group(2), m.group(3), m.group(4),
                             int(m.group(5)) if m.group(5) else None)
            if entries and entry.ms < entries[-1].ms:
                raise LogParseError("timestamps go backwards", n)
            entries.append(entry)
        if not entries:
            raise LogParseError("empty flight log", 0)
        return cls(entries=entries)

    @classmethod
    def read(cls, path) -> "FlightLog":
        return cls.parse(Path(path).read_text())

    def acknowledged(self, drone: str) -> list[str]:
        """Commands this drone acknowledged, in order."""
        return [e.text[4:] for e in self.entries
                if e.drone == drone and e.direction == "EVENT" and e.text.startswith("ack ")]


# -- controller ------------------------------------------------------------

def _valid_reply(wire: str, reply: str) -> bool:
    word = wire.split()[0]
    if word == "battery?":
        return reply.isdigit() and 0 <= int(reply) <= 100
    if word == "sn?":
        return bool(reply) and reply.lower() not in ("error", "ok")
    return reply.lower() == "ok"


class Controller:
    def __init__(self, policy: RetryPolicy | None = None, clock=None,
                 bind: tuple[str, int] = ("0.0.0.0", 0)):
        self.policy = policy or RetryPolicy()
        self.clock = clock or SimClock()
        self.log = FlightLog(self.clock)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_BROADCAST, 1)
        self.sock.bind(bind)
        self.sock.settimeout(0.05)
        self.links: dict[tuple[str, int], DroneLink] = {}
        self._inbox: dict[tuple[str, int], queue.Queue] = {}
        self._unsolicited: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self._rx = threading.Thread(target=self._receive, name="link-rx", daemon=True)
        self._rx.start()

    def close(self) -> None:
        self._stop.set()
        self._rx.join(timeout=2)
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- datagram plumbing ----------------------------------------------

    def _receive(self) -> None:
        while not self._stop.is_set():
            try:
                data, addr = self.sock.recvfrom(1024)
            except socket.timeout:
                continue
            except OSError:
                break
            reply = data.decode("ascii", errors="replace").strip()
            link = self.links.get(addr)
            if link is None:
                self.log.add("-", "RECV", reply)
                self._unsolicited.put((addr, reply))
                continue
            battery = None
            if link.pending == "battery?" and reply.isdigit():
                battery = int(reply)
            self.log.add(link.label, "RECV", reply, battery)
            if link.pending is None:
                self.log.event(link.label, f"late reply {reply!r} ignored")
                continue
            self._inbox[addr].put(reply)

    def _send(self, link: DroneLink, wire: str) -> None:
        link.pending = wire
        self.log.add(link.label, "SENT", wire)
        self.sock.sendto(wire.encode("ascii"), link.address)

    def _await(self, link: DroneLink, wire: str) -> str:
        """Wait for the reply to an already-sent command, re-sending as needed."""
        timeout = self.policy.timeout_for(wire)
        inbox = self._inbox[link.address]
        attempt = 0
        while True:
            try:
                reply = inbox.get(timeout=self.clock.wall(timeout))
            except queue.Empty:
                reply = None
            if reply is not None and _valid_reply(wire, reply):
                link.pending = None
                if wire == "battery?":
                    link.last_battery = int(reply)
                self.log.event(link.label, f"ack {wire}")
                return reply
            if attempt >= self.policy.max_retries:
                link.pending = None
                link.move_to(LinkState.LOST)
                self.log.event(link.label, f"abort {wire} after {attempt} retries")
                raise LinkLost(link, wire)
            attempt += 1
            why = "timeout" if reply is None else f"bad reply {reply!r}"
            self.log.event(link.label, f"retry {attempt}/{self.policy.max_retries} {wire} ({why})")
            self._send(link, wire)

    def send_with_retry(self, link: DroneLink, wire: str) -> str:
        if link.state == LinkState.LOST:
            raise LinkLost(link, wire)
        self._send(link, wire)
        return self._await(link, wire)

    def _dispatch(self, jobs: Sequence[tuple[DroneLink, str]]) -> dict[str, str | LinkLost]:
        """Send every job, then await all replies concurrently."""
        for link, wire in jobs:
            self._send(link, wire)
        results: dict[str, str | LinkLost] = {}
        if len(jobs) == 1:
            link, wire = jobs[0]
            try:
                results[link.label] = self._await(link, wire)
            except LinkLost as exc:
                results[link.label] = exc
            return results
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            futures = {link.label: pool.submit(self._await, link, wire) for link, wire in jobs}
            for label, fut in futures.items():
                try:
                    results[label] = fut.result()
                except LinkLost as exc:
                    results[label] = exc
        return results

    # -- discovery and numbering ----------------------------------------

    def discover(self, n: int, timeout: float = 10.0,
                 candidates: Sequence[tuple[str, int]] = (("255.255.255.255", TELLO_PORT),),
                 resend_every: float = 1.0) -> list[DroneLink]:
        if n < 1:
            raise ValueError("need at least one drone")
        self.log.start()
        start = self.clock.now()
        found: dict[tuple[str, int], None] = {}
        next_probe = start
        while len(found) < n:
            now = self.clock.now()
            if now - start > timeout:
                self.log.event("-", f"discovery timeout: {len(found)} of {n} found")
                raise DiscoveryTimeout(n, len(found))
            if now >= next_probe:
                for addr in candidates:
                    if addr not in found:
                        self.log.add("-", "SENT", "command")
                        self.sock.sendto(b"command", addr)
                next_probe = now + resend_every
            try:
                addr, reply = self._unsolicited.get(timeout=self.clock.wall(0.1))
            except queue.Empty:
                continue
            if reply.lower() == "ok" and addr not in found:
                found[addr] = None
                self.log.event("-", f"found drone at {addr[0]}:{addr[1]}")
        links = []
        for addr in list(found)[:n]:
            link = DroneLink(sn="", address=addr)
            self.links[addr] = link
            self._inbox[addr] = queue.Queue()
            link.sn = self.send_with_retry(link, "sn?")
            links.append(link)
        return links

    def number_by_sn(self, links: Sequence[DroneLink], sn_map: dict[int, str]) -> list[DroneLink]:
        by_sn = {link.sn: link for link in links}
        missing = [sn for sn in sn_map.values() if sn not in by_sn]
        if missing:
            raise UnknownSnError(f"SN codes not discovered: {missing}")
        mapped = set(sn_map.values())
        spare = [link.sn for link in links if link.sn not in mapped]
        if spare:
            raise UnmappedDroneError(f"discovered drones without a number: {spare}")
        for index, sn in sorted(sn_map.items()):
            link = by_sn[sn]
            link.index = index
            link.move_to(LinkState.NUMBERED)
            self.log.event(str(index), f"numbered sn={sn}")
        return sorted(links, key=lambda link: link.index)

    # -- mission execution ----------------------------------------------

    def fly(self, text: FlightText, candidates: Sequence[tuple[str, int]],
            discovery_timeout: float = 10.0) -> FlightLog:
        """Run a whole flight text: discovery, numbering, then ``execute``."""
        try:
            links = self.discover(text.drone_count, discovery_timeout, candidates)
            for link in links:
                self.send_with_retry(link, "command")  # correct_ip: link check
        except LinkLost as exc:
            self.log.event("-", f"abort: {exc}")
            raise MissionAborted(str(exc), self.log) from exc
        self.number_by_sn(links, text.sn_map)
        return self.execute(text, links)

    def execute(self, text: FlightText, links: Sequence[DroneLink]) -> FlightLog:
        return _Mission(self, text, links).run()


class _Mission:
    def __init__(self, ctl: Controller, text: FlightText, links: Sequence[DroneLink]):
        self.ctl = ctl
        self.log = ctl.log
        self.text = text
        self.links = {link.index: link for link in links}
        if any(i is None for i in self.links):
            raise ValueError("links must be numbered before execution")
        self.threshold = text.battery_threshold()
        self.deferred = {c.target for c in text.body if c.op == "takeoff" and c.target != ALL}
        # past this body position a drone is on its way home; losing it then is not fatal
        self.homebound: dict[int, int] = {}
        for pos, c in enumerate(text.body):
            if isinstance(c.target, int) and c.op in ("back", "land"):
                self.homebound.setdefault(c.target, pos)

    def airborne(self) -> list[DroneLink]:
        return [l for _, l in sorted(self.links.items()) if l.state == LinkState.AIRBORNE]

    def run(self) -> FlightLog:
        self.preflight()
        body = list(self.text.body)
        pos = 0
        while pos < len(body):
            cmd = body[pos]
            if cmd.op == "battery_check":
                self.threshold = int(cmd.arg)
                self.log.event("-", f"battery floor set to {self.threshold}%")
                pos += 1
            elif cmd.op == "sync":
                self.log.event("-", f"sync {cmd.arg:g}s")
                self.ctl.clock.sleep(cmd.arg)
                self.poll(self.airborne(), pos)
                pos += 1
            elif cmd.target == ALL:
                targets = self.airborne() if cmd.op != "takeoff" else [
                    l for l in self.links.values() if l.state == LinkState.NUMBERED]
                self.block([(l, cmd) for l in targets], pos)
                pos += 1
            else:
                block = []
                seen = set()
                while pos < len(body) and isinstance(body[pos].target, int) \
                        and body[pos].target not in seen:
                    seen.add(body[pos].target)
                    block.append((self.links[body[pos].target], body[pos]))
                    pos += 1
                self.block(block, pos - 1)
        self.log.event("-", "mission complete")
        return self.log

    def preflight(self) -> None:
        everyone = [l for _, l in sorted(self.links.items())]
        self.block([(l, Command("battery?", l.index)) for l in everyone], -1, poll=False)
        low = [l for l in everyone if l.last_battery is not None and l.last_battery < self.threshold]
        if low:
            labels = ", ".join(f"{l.label} ({l.last_battery}%)" for l in low)
            self.log.event("-", f"takeoff refused, battery below {self.threshold}%: {labels}")
            raise PreflightError(f"battery too low for takeoff: {labels}")
        launch = [l for l in everyone if l.index not in self.deferred]
        self.block([(l, Command("takeoff", l.index)) for l in launch], -1)

    def block(self, items: list[tuple[DroneLink, Command]], pos: int, poll: bool = True) -> None:
        jobs = []
        for link, cmd in items:
            if link.state == LinkState.LOST:
                self.log.event(link.label, f"skip {cmd.wire} (link lost)")
                continue
            if link.forced_down and cmd.op != "battery?":
                self.log.event(link.label, f"skip {cmd.wire} (forced landing)")
                continue
            if cmd.op == "land" and link.state != LinkState.AIRBORNE:
                self.log.event(link.label, f"skip {cmd.wire} (not airborne)")
                continue
            if cmd.op in MOTION_OPS and (link.last_battery is not None
                                          and link.last_battery < self.threshold):
                self.force_land(link)
                continue
            jobs.append((link, cmd))
        if not jobs:
            return
        results = self.ctl._dispatch([(l, c.wire) for l, c in jobs])
        failed = []
        for link, cmd in jobs:
            outcome = results[link.label]
            if isinstance(outcome, LinkLost):
                failed.append(link)
            elif cmd.op == "takeoff":
                link.move_to(LinkState.AIRBORNE)
            elif cmd.op == "land":
                link.move_to(LinkState.LANDED)
        for link in failed:
            self.lost(link, pos, "lost before finishing its service")
        if poll:
            self.poll([l for l, _ in jobs if l.state == LinkState.AIRBORNE], pos)

    def lost(self, link: DroneLink, pos: int, what: str) -> None:
        if pos < self.homebound.get(link.index, len(self.text.body)):
            self.abort(f"drone {link.label} {what}")
        self.log.event(link.label, "link lost on the way home; mission continues")

    def poll(self, links: list[DroneLink], pos: int) -> None:
        """Battery check at a block boundary; lands any drone under the floor."""
        if not links:
            return
        results = self.ctl._dispatch([(l, "battery?") for l in links])
        for link in links:
            if isinstance(results[link.label], LinkLost):
                self.lost(link, pos, "stopped answering battery queries")
            elif link.last_battery < self.threshold:
                self.force_land(link)

    def force_land(self, link: DroneLink) -> None:
        if link.forced_down:
            return
        link.forced_down = True
        self.log.event(link.label, f"forced landing: battery {link.last_battery}% "
                                   f"below {self.threshold}%")
        try:
            self.ctl.send_with_retry(link, "land")
            link.move_to(LinkState.LANDED)
        except LinkLost:
            self.log.event(link.label, "forced landing unacknowledged")

    def abort(self, reason: str) -> None:
        self.log.event("-", f"abort: {reason}")
        for link in self.airborne():
            try:
                self.ctl.send_with_retry(link, "land")
                link.move_to(LinkState.LANDED)
            except LinkLost:
                self.log.event(link.label, "land during abort unacknowledged")
        raise MissionAborted(reason, self.log)
