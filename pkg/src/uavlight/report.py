"""Result artifacts: deployment map, anneal trace and battery charts.

Everything is plain SVG built with ``xml.etree`` plus CSV beside it, so the
outputs open in a browser and load into any plotting tool.
"""

from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from . import energy as en
from .link import FlightLog
from .placement import AnnealTrace
from .planner import MissionPlan, lighting_radius
from .scenario import Scenario

BETA_COLORS = {1: "#d62728", 2: "#ff7f0e", 3: "#2ca02c"}
UAV_COLORS = ("#1f77b4", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#7f7f7f")

SVG_NS = "http://www.w3.org/2000/svg"


def _svg(width: int, height: int) -> ET.Element:
    return ET.Element("svg", xmlns=SVG_NS, width=str(width), height=str(height),
                      viewBox=f"0 0 {width} {height}")


def _text(parent, x, y, s, size=12, anchor="start", **kw) -> None:
    el = ET.SubElement(parent, "text", x=f"{x:.1f}", y=f"{y:.1f}", **{"font-size": str(size)},
                       **{"text-anchor": anchor}, **kw)
    el.text = s


def _tostring(root: ET.Element) -> str:
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


class _Frame:
    """World-to-pixel mapping with equal axis scale (y points up)."""

    def __init__(self, xs, ys, width, height, pad=40):
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        span = max(x1 - x0, y1 - y0, 1e-6)
        self.scale = min(width - 2 * pad, height - 2 * pad) / span
        self.x0 = x0 - ((width - 2 * pad) / self.scale - (x1 - x0)) / 2
        self.y0 = y0 - ((height - 2 * pad) / self.scale - (y1 - y0)) / 2
        self.pad = pad
        self.height = height

    def __call__(self, x, y):
        return (self.pad + (x - self.x0) * self.scale,
                self.height - self.pad - (y - self.y0) * self.scale)


def map2d_svg(scenario: Scenario, plan: MissionPlan, width: int = 640, height: int = 640) -> str:
    """Top view: users by brightness level, dashed UAV paths, one circle per lit disk.

    Users and homes use squares and triangles so that ``<circle>`` elements
    stand only for lighting disks. A relief UAV shares its incumbent's disk.
    """
    primaries = [p for p in plan.uavs if p.role == "primary"]
    radii = {p.uav_index: lighting_radius(p, plan.light_angle) for p in primaries}
    xs = [u.x for u in scenario.users] + [p.home.X for p in plan.uavs]
    ys = [u.y for u in scenario.users] + [p.home.Y for p in plan.uavs]
    for p in primaries:
        r = radii[p.uav_index]
        xs += [p.target[0] - r, p.target[0] + r]
        ys += [p.target[1] - r, p.target[1] + r]
    f = _Frame(xs, ys, width, height)
    root = _svg(width, height)
    ET.SubElement(root, "rect", width=str(width), height=str(height), fill="white")

    disks = ET.SubElement(root, "g", id="disks")
    for k, p in enumerate(primaries):
        cx, cy = f(*p.target)
        ET.SubElement(disks, "circle", cx=f"{cx:.2f}", cy=f"{cy:.2f}",
                      r=f"{radii[p.uav_index] * f.scale:.2f}",
                      fill=UAV_COLORS[k % len(UAV_COLORS)], **{"fill-opacity": "0.15"},
                      stroke=UAV_COLORS[k % len(UAV_COLORS)])

    paths = ET.SubElement(root, "g", id="paths")
    for k, p in enumerate(plan.uavs):
        hx, hy = f(p.home.X, p.home.Y)
        tx, ty = f(*p.target)
        color = UAV_COLORS[k % len(UAV_COLORS)]
        ET.SubElement(paths, "line", x1=f"{hx:.2f}", y1=f"{hy:.2f}", x2=f"{tx:.2f}", y2=f"{ty:.2f}",
                      stroke=color, **{"stroke-dasharray": "6 4", "stroke-width": "1.5"})
        ET.SubElement(paths, "polygon", fill=color,
                      points=f"{hx:.2f},{hy - 7:.2f} {hx - 6:.2f},{hy + 5:.2f} {hx + 6:.2f},{hy + 5:.2f}")
        _text(paths, hx + 8, hy + 4, f"UAV {p.uav_index} ({p.role})", size=11)

    users = ET.SubElement(root, "g", id="users")
    for u in scenario.users:
        x, y = f(u.x, u.y)
        ET.SubElement(users, "rect", x=f"{x - 3:.2f}", y=f"{y - 3:.2f}", width="6", height="6",
                      fill=BETA_COLORS.get(u.beta, "black"))

    legend = ET.SubElement(root, "g", id="legend")
    for k, (beta, color) in enumerate(sorted(BETA_COLORS.items())):
        ET.SubElement(legend, "rect", x="10", y=str(10 + 16 * k), width="8", height="8", fill=color)
        _text(legend, 24, 18 + 16 * k, f"brightness level {beta}", size=11)
    return _tostring(root)


def _polyline_chart(series: dict[str, list[tuple[float, float]]], xlabel: str, ylabel: str,
                    width: int = 640, height: int = 360, y_floor: float | None = None) -> str:
    pad_l, pad_r, pad_t, pad_b = 60, 20, 20, 45
    pts = [pt for s in series.values() for pt in s]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0 = min(p[1] for p in pts) if y_floor is None else y_floor
    y1 = max(p[1] for p in pts)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def px(x, y):
        return (pad_l + (x - x0) / (x1 - x0) * (width - pad_l - pad_r),
                height - pad_b - (y - y0) / (y1 - y0) * (height - pad_t - pad_b))

    root = _svg(width, height)
    ET.SubElement(root, "rect", width=str(width), height=str(height), fill="white")
    ax = ET.SubElement(root, "g", id="axes", stroke="black")
    ET.SubElement(ax, "line", x1=str(pad_l), y1=str(height - pad_b), x2=str(width - pad_r),
                  y2=str(height - pad_b))
    ET.SubElement(ax, "line", x1=str(pad_l), y1=str(pad_t), x2=str(pad_l), y2=str(height - pad_b))
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        _text(root, px(xv, y0)[0], height - pad_b + 16, f"{xv:.4g}", size=10, anchor="middle")
        _text(root, pad_l - 6, px(x0, yv)[1] + 4, f"{yv:.4g}", size=10, anchor="end")
    _text(root, width / 2, height - 8, xlabel, anchor="middle")
    _text(root, 14, pad_t + 10, ylabel)
    for k, (name, s) in enumerate(series.items()):
        color = UAV_COLORS[k % len(UAV_COLORS)]
        ET.SubElement(root, "polyline", fill="none", stroke=color, **{"stroke-width": "1.5"},
                      points=" ".join("{:.2f},{:.2f}".format(*px(x, y)) for x, y in s))
        _text(root, width - pad_r - 4, pad_t + 14 + 14 * k, name, size=11, anchor="end", fill=color)
    return _tostring(root)


def trace_svg(trace: AnnealTrace) -> str:
    """Objective against outer step, best and current."""
    best = [(k, e[1]) for k, e in enumerate(trace.entries)]
    cur = [(k, e[2]) for k, e in enumerate(trace.entries)]
    return _polyline_chart({"best": best, "current": cur}, "outer step", "max distance (m)",
                           y_floor=0.0)


# -- battery reconstruction ------------------------------------------------

_DURATION_OPS = {"takeoff", "land", "up", "down", "forward", "back", "cw", "ccw"}


@dataclass
class DroneTimeline:
    drone: str
    readings: list[tuple[float, int]] = field(default_factory=list)  # (s, pct)
    acks: list[tuple[float, str]] = field(default_factory=list)
    events: list[tuple[float, str]] = field(default_factory=list)
    retries: int = 0
    forced_land: bool = False

    @property
    def takeoff_s(self) -> float | None:
        return next((t for t, c in self.acks if c == "takeoff"), None)

    @property
    def land_s(self) -> float | None:
        return next((t for t, c in reversed(self.acks) if c == "land"), None)


def timelines(flight_log: FlightLog) -> dict[str, DroneTimeline]:
    out: dict[str, DroneTimeline] = {}
    for e in flight_log.entries:
        if e.drone == "-":
            continue
        tl = out.setdefault(e.drone, DroneTimeline(e.drone))
        t = e.ms / 1000
        if e.battery is not None:
            tl.readings.append((t, e.battery))
        if e.direction != "EVENT":
            continue
        if e.text.startswith("ack "):
            tl.acks.append((t, e.text[4:]))
        else:
            tl.events.append((t, e.text))
            tl.retries += e.text.startswith("retry ")
            tl.forced_land |= e.text.startswith("forced landing")
    return dict(sorted(out.items()))


class _DrainModel:
    """Cumulative energy-model drain (percent) along one drone's acknowledged commands."""

    def __init__(self, tl: DroneTimeline, plan: MissionPlan):
        v_vert, v_horiz, yaw = plan.speeds
        hover = sum(en.hover_powers(plan.propulsion)) / plan.capacity_j * 100
        # (start, end, rate %/s) pieces; idle gaps between are hover (+lamp when lit)
        self.pieces: list[tuple[float, float, float]] = []
        z, airborne, lit, cursor = 0.0, False, False, None
        for t, cmd in tl.acks:
            parts = cmd.split()
            op = parts[0]
            if op not in _DURATION_OPS:
                continue
            arg = int(parts[1]) if len(parts) > 1 else 0
            if op == "takeoff":
                dur, speed, z = plan.takeoff_height / v_vert, v_vert, plan.takeoff_height
            elif op == "land":
                dur, speed, z = z / v_vert, v_vert, 0.0
            elif op in ("up", "down"):
                dur, speed = arg / 100 / v_vert, v_vert
                z += arg / 100 if op == "up" else -arg / 100
            elif op in ("forward", "back"):
                dur, speed = arg / 100 / v_horiz, v_horiz
            else:
                dur, speed = arg / yaw, 0.0
            start = t - dur
            if airborne and cursor is not None and start > cursor:
                self.pieces.append((cursor, start, hover + (plan.mu if lit else 0.0)))
            rate = en.propulsion_power(speed, plan.propulsion) / plan.capacity_j * 100
            self.pieces.append((max(start, cursor or start), t, rate))
            cursor = t
            airborne = op != "land"
            if op in ("forward", "down"):
                lit = True
            elif op in ("back", "land"):
                lit = False
        self.end = cursor
        self.tail_rate = hover if airborne else 0.0

    def __call__(self, t: float) -> float:
        total = 0.0
        for a, b, rate in self.pieces:
            if t <= a:
                break
            total += rate * (min(t, b) - a)
        if self.end is not None and t > self.end:
            total += self.tail_rate * (t - self.end)
        return total


def battery_series(flight_log: FlightLog, plan: MissionPlan,
                   step: float = 1.0) -> dict[str, list[tuple[float, float]]]:
    """Battery against time per drone.

    Readings are whole percent, truncated, so each is taken as its midpoint
    (n + 0.5). Between readings the model's drain curve is stretched to meet
    both ends; after the last reading the model alone carries it to landing.
    """
    out: dict[str, list[tuple[float, float]]] = {}
    for drone, tl in timelines(flight_log).items():
        if not tl.readings:
            continue
        model = _DrainModel(tl, plan)
        anchors = [(t, min(100.0, n + 0.5)) for t, n in tl.readings]
        end = tl.land_s if tl.land_s is not None else anchors[-1][0]
        grid = sorted({t for t, _ in anchors} | {end} |
                      {anchors[0][0] + k * step
                       for k in range(int((end - anchors[0][0]) / step) + 1)})
        series = []
        j = 0
        for t in grid:
            while j + 1 < len(anchors) and anchors[j + 1][0] <= t:
                j += 1
            t0, b0 = anchors[j]
            if j + 1 < len(anchors):
                t1, b1 = anchors[j + 1]
                d_model = model(t1) - model(t0)
                frac = (model(t) - model(t0)) / d_model if d_model > 0 else (t - t0) / (t1 - t0)
                value = b0 - (b0 - b1) * frac
            else:
                value = b0 - (model(t) - model(t0))
            series.append((round(t, 3), max(0.0, value)))
        # a rising reading (rounding) must not make the series go up
        for k in range(1, len(series)):
            if series[k][1] > series[k - 1][1]:
                series[k] = (series[k][0], series[k - 1][1])
        out[drone] = series
    return out


def battery_csv(series: dict[str, list[tuple[float, float]]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["drone", "t_s", "battery_pct"])
    for drone, pts in series.items():
        for t, b in pts:
            w.writerow([drone, f"{t:.3f}", f"{b:.3f}"])
    return buf.getvalue()


def battery_svg(series: dict[str, list[tuple[float, float]]]) -> str:
    return _polyline_chart({f"UAV {d}": s for d, s in series.items()}, "time (s)", "battery (%)",
                           y_floor=0.0)


def timeline_summary(flight_log: FlightLog, plan: MissionPlan) -> dict:
    series = battery_series(flight_log, plan)
    drones = {}
    for drone, tl in timelines(flight_log).items():
        lit_to = next((t - int(c.split()[1]) / 100 / plan.speeds[1]
                       for t, c in tl.acks if c.startswith("back ")), None)
        # on station once the last positioning move before heading back is done
        lit_from = max((t for t, c in tl.acks if c.split()[0] in ("forward", "up", "down")
                        and (lit_to is None or t < lit_to)), default=None)
        drones[drone] = {
            "takeoff_s": tl.takeoff_s,
            "land_s": tl.land_s,
            "lit_from_s": lit_from,
            "lit_to_s": lit_to,
            "commands_acked": len(tl.acks),
            "retries": tl.retries,
            "forced_land": tl.forced_land,
            "final_battery_pct": round(series[drone][-1][1], 3) if drone in series else None,
        }
    aborted = any(e.text.startswith("abort:") for e in flight_log.entries if e.drone == "-")
    return {"duration_s": flight_log.entries[-1].ms / 1000, "aborted": aborted, "drones": drones}
