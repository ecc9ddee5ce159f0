"""Lighting-disk geometry: ground distances, disk size and hover height."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .scenario import BrightnessBand, UavPose, UserRequest

COVER_TOL = 1e-9


class InfeasibleHeightError(ValueError):
    """No height inside the brightness band lights every user."""

    def __init__(self, d_max: float, required: float, band: BrightnessBand):
        self.d_max = d_max
        self.required = required
        self.band = band
        super().__init__(
            f"covering d_max={d_max:.4f} m needs h={required:.4f} m, "
            f"above band {band.beta} ceiling {band.h_max} m")


@dataclass(frozen=True)
class LightingDisk:
    center: tuple[float, float]
    radius: float
    area: float


def _check_alpha(alpha: float) -> None:
    if not (0 < alpha < 90):
        raise ValueError(f"light angle must lie in (0, 90) degrees, got {alpha}")


def horizontal_distance(p: UavPose, u: UserRequest) -> float:
    return math.hypot(p.X - u.x, p.Y - u.y)


def max_distance(p: UavPose, users: Sequence[UserRequest]) -> float:
    if not users:
        raise ValueError("max_distance needs at least one user")
    return max(horizontal_distance(p, u) for u in users)


def lighting_disk(p: UavPose, alpha: float) -> LightingDisk:
    _check_alpha(alpha)
    radius = p.Z * math.tan(math.radians(alpha))
    return LightingDisk((p.X, p.Y), radius, math.pi * radius * radius)


def adjust_height(alpha: float, d_max: float, band: BrightnessBand) -> float:
    """Lowest height in ``band`` whose disk reaches ``d_max``.

    Lower is brighter, so the band floor wins whenever it already covers.
    """
    _check_alpha(alpha)
    if d_max < 0:
        raise ValueError("d_max must be >= 0")
    required = d_max / math.tan(math.radians(alpha))
    if required > band.h_max:
        raise InfeasibleHeightError(d_max, required, band)
    return max(band.h_min, required)


def governing_band(users: Iterable[UserRequest], bands: Sequence[BrightnessBand]) -> BrightnessBand:
    """Band of the brightest (lowest level) request among ``users``."""
    level = min(u.beta for u in users)
    for b in bands:
        if b.beta == level:
            return b
    raise KeyError(level)


def covers(p: UavPose, alpha: float, users: Iterable[UserRequest]) -> bool:
    r = lighting_disk(p, alpha).radius
    return all(horizontal_distance(p, u) <= r + COVER_TOL for u in users)
