"""Deployment-point search: simulated annealing on the minimax distance.

The objective for a candidate hover point is the largest ground distance
to any user in the cluster, i.e. the 1-center problem. ``exact_one_center``
solves the same problem exactly (Welzl) and is used to verify the
annealer, and to decide whether a cluster fits under one lighting disk.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import governing_band
from .scenario import BrightnessBand, Scenario, UserRequest

Point = tuple[float, float]


class FleetExhaustedError(RuntimeError):
    def __init__(self, needed: int, fleet_size: int):
        self.needed = needed
        self.fleet_size = fleet_size
        super().__init__(f"covering all users needs at least {needed} UAVs, fleet has {fleet_size}")


@dataclass(frozen=True)
class AnnealConfig:
    t_init: float = 100.0
    t_end: float = 0.01
    cooling: float = 0.99
    inner_iters: int = 100
    step_scale: float | None = None  # None: half the users' bounding-box diagonal
    rng_seed: int = 0
    random_start: bool = False

    def __post_init__(self):
        if not (0 < self.t_end < self.t_init):
            raise ValueError("need 0 < t_end < t_init")
        if not (0 < self.cooling < 1):
            raise ValueError("cooling factor must lie in (0, 1)")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")
        if self.step_scale is not None and self.step_scale < 0:
            raise ValueError("step_scale must be >= 0")


@dataclass(frozen=True)
class AnnealTrace:
    entries: tuple[tuple[float, float, float], ...]  # (temperature, best_f, current_f)
    final_point: Point
    final_f: float

    def to_csv(self) -> str:
        lines = ["temperature,best_f,current_f"]
        lines += [f"{t!r},{b!r},{c!r}" for t, b, c in self.entries]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Cluster:
    users: tuple[int, ...]
    uav: int
    band: BrightnessBand


@dataclass(frozen=True)
class Assignment:
    clusters: tuple[Cluster, ...]

    @property
    def dense(self) -> bool:
        return len(self.clusters) == 1


def _points(users: Sequence[UserRequest]) -> list[Point]:
    if not users:
        raise ValueError("need at least one user")
    return [(u.x, u.y) for u in users]


def convex_hull(points: Sequence[Point]) -> list[Point]:
    """Monotone-chain hull; collinear and duplicate points are dropped."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def objective(candidate: Point, users: Sequence[UserRequest]) -> float:
    X, Y = candidate
    return math.sqrt(max((X - x) ** 2 + (Y - y) ** 2 for x, y in _points(users)))


def metropolis_accept(delta_f: float, temperature: float, rand_u: float) -> bool:
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if delta_f <= 0:
        return True
    return rand_u < math.exp(-delta_f / temperature)


def anneal(users: Sequence[UserRequest], cfg: AnnealConfig = AnnealConfig()) -> AnnealTrace:
    pts = _points(users)
    # the farthest user from any point is always a hull vertex
    hull = convex_hull(pts)

    def f(X, Y):
        return math.sqrt(max((X - x) ** 2 + (Y - y) ** 2 for x, y in hull))

    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x_lo, x_hi, y_lo, y_hi = min(xs), max(xs), min(ys), max(ys)
    pad_x, pad_y = 0.1 * (x_hi - x_lo), 0.1 * (y_hi - y_lo)
    x_lo, x_hi, y_lo, y_hi = x_lo - pad_x, x_hi + pad_x, y_lo - pad_y, y_hi + pad_y
    step = cfg.step_scale
    if step is None:
        step = 0.5 * math.hypot(max(xs) - min(xs), max(ys) - min(ys))

    rng = np.random.default_rng(cfg.rng_seed)
    if cfg.random_start:
        cx, cy = float(rng.uniform(x_lo, x_hi)), float(rng.uniform(y_lo, y_hi))
    else:
        cx, cy = sum(xs) / len(xs), sum(ys) / len(ys)
    fc = f(cx, cy)
    bx, by, bf = cx, cy, fc

    entries = []
    t = cfg.t_init
    n = cfg.inner_iters
    while t > cfg.t_end:
        sigma = step * (t / cfg.t_init)
        moves = rng.normal(0.0, 1.0, size=(n, 2)) * sigma
        draws = rng.random(n)
        for (mx, my), u in zip(moves.tolist(), draws.tolist()):
            nx = min(max(cx + mx, x_lo), x_hi)
            ny = min(max(cy + my, y_lo), y_hi)
            fn = f(nx, ny)
            if metropolis_accept(fn - fc, t, u):
                cx, cy, fc = nx, ny, fn
                if fc < bf:
                    bx, by, bf = cx, cy, fc
        entries.append((t, bf, fc))
        t *= cfg.cooling
    return AnnealTrace(tuple(entries), (bx, by), bf)


# -- exact minimum enclosing circle ---------------------------------------

_EPS = 1e-12


def _in_circle(c, p) -> bool:
    return c is not None and math.hypot(p[0] - c[0], p[1] - c[1]) <= c[2] * (1 + 1e-12) + _EPS


def _diameter(a, b):
    cx, cy = (a[0] + b[0]) / 2, (a[1] + b[1]) / 2
    return (cx, cy, max(math.hypot(cx - a[0], cy - a[1]), math.hypot(cx - b[0], cy - b[1])))


def _circumcircle(a, b, c):
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2
    if d == 0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(math.hypot(x - p[0], y - p[1]) for p in (a, b, c))
    return (x, y, r)


def _cross(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _circle_two(points, p, q):
    circ = _diameter(p, q)
    left = right = None
    for r in points:
        if _in_circle(circ, r):
            continue
        side = _cross(p, q, r)
        c = _circumcircle(p, q, r)
        if c is None:
            continue
        if side > 0 and (left is None or _cross(p, q, c) > _cross(p, q, left)):
            left = c
        elif side < 0 and (right is None or _cross(p, q, c) < _cross(p, q, right)):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _circle_one(points, p):
    c = (p[0], p[1], 0.0)
    for i, q in enumerate(points):
        if not _in_circle(c, q):
            if c[2] == 0.0:
                c = _diameter(p, q)
            else:
                c = _circle_two(points[: i + 1], p, q)
    return c


def exact_one_center(users: Sequence[UserRequest], seed: int = 0) -> tuple[Point, float]:
    """Smallest circle containing every user (randomized incremental, expected O(n))."""
    pts = _points(users)
    random.Random(seed).shuffle(pts)
    c = None
    for i, p in enumerate(pts):
        if c is None or not _in_circle(c, p):
            c = _circle_one(pts[: i + 1], p)
    return (c[0], c[1]), c[2]


# -- partitioning ---------------------------------------------------------

def _feasible(users: Sequence[UserRequest], scenario: Scenario) -> bool:
    band = governing_band(users, scenario.bands)
    _, radius = exact_one_center(users)
    return radius <= band.h_max * math.tan(math.radians(scenario.light_angle))


def _bisect(idx: list[int], users: Sequence[UserRequest]) -> tuple[list[int], list[int]]:
    pts = np.array([(users[i].x, users[i].y) for i in idx])
    axis = 0 if pts[:, 0].var() >= pts[:, 1].var() else 1
    labels = pts[:, axis] > pts[:, axis].mean()
    if labels.all() or not labels.any():
        half = len(idx) // 2
        order = np.argsort(pts[:, axis], kind="stable")
        labels = np.zeros(len(idx), dtype=bool)
        labels[order[half:]] = True
    for _ in range(50):
        c0 = pts[~labels].mean(axis=0)
        c1 = pts[labels].mean(axis=0)
        new = ((pts - c1) ** 2).sum(axis=1) < ((pts - c0) ** 2).sum(axis=1)
        if new.all() or not new.any() or (new == labels).all():
            break
        labels = new
    return ([i for i, lab in zip(idx, labels) if not lab],
            [i for i, lab in zip(idx, labels) if lab])


def partition_users(scenario: Scenario) -> Assignment:
    """Group users so each group fits under one lighting disk, one UAV per group."""
    users = scenario.users
    everyone = list(range(len(users)))
    if _feasible(users, scenario):
        groups = [everyone]
    else:
        pending = []
        for level in (1, 2, 3):
            grp = [i for i in everyone if users[i].beta == level]
            if grp:
                pending.append(grp)
        groups = []
        while pending:
            grp = pending.pop(0)
            if _feasible([users[i] for i in grp], scenario):
                groups.append(grp)
                continue
            if len(groups) + len(pending) + 2 > scenario.fleet_size:
                raise FleetExhaustedError(len(groups) + len(pending) + 2, scenario.fleet_size)
            a, b = _bisect(grp, users)
            pending[:0] = [a, b]
    if len(groups) > scenario.fleet_size:
        raise FleetExhaustedError(len(groups), scenario.fleet_size)

    # each group takes the nearest still-free home
    free = list(range(scenario.fleet_size))
    clusters = []
    for grp in groups:
        members = [users[i] for i in grp]
        (cx, cy), _ = exact_one_center(members)
        uav = min(free, key=lambda k: (math.hypot(scenario.homes[k].X - cx,
                                                  scenario.homes[k].Y - cy), k))
        free.remove(uav)
        clusters.append(Cluster(tuple(grp), uav, governing_band(members, scenario.bands)))
    return Assignment(tuple(clusters))
