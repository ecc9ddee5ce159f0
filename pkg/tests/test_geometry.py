import math

import pytest
from hypothesis import given, settings, strategies as st

from uavlight.geometry import (InfeasibleHeightError, adjust_height, covers, governing_band,
                               horizontal_distance, lighting_disk, max_distance)
from uavlight.scenario import DEFAULT_BANDS, BrightnessBand, UavPose, UserRequest


def user(x, y, beta=2):
    return UserRequest(x, y, beta, 10.0)


@pytest.mark.parametrize("pose, u, expected", [
    (UavPose(0, 0, 7), user(0, 0), 0.0),
    (UavPose(3, 4, 10), user(0, 0), 5.0),
    (UavPose(1.5, -2, 0), user(-0.5, 1), 3.605551275463989),  # sqrt(2^2 + 3^2)
])
def test_horizontal_distance(pose, u, expected):
    assert horizontal_distance(pose, u) == pytest.approx(expected, abs=1e-12)


def test_max_distance_examples():
    assert max_distance(UavPose(4, 4), [user(4, 4)]) == 0
    assert max_distance(UavPose(0, 0), [user(1, 0), user(0, 2)]) == 2
    with pytest.raises(ValueError):
        max_distance(UavPose(0, 0), [])


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=10, max_size=10),
       st.floats(-50, 50), st.floats(-50, 50))
def test_max_distance_is_loop_max(points, px, py):
    users = [user(x, y) for x, y in points]
    p = UavPose(px, py, 1.0)
    best = 0.0
    for x, y in points:
        best = max(best, math.sqrt((px - x) ** 2 + (py - y) ** 2))
    assert max_distance(p, users) == pytest.approx(best, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("z, alpha, radius, area", [
    (0.0, 30, 0.0, 0.0),
    (1.0, 45, 1.0, math.pi),
    (2.0, 30, 2 / math.sqrt(3), 4 * math.pi / 3),  # 1.15470, 4.18879
])
def test_lighting_disk(z, alpha, radius, area):
    d = lighting_disk(UavPose(1, 2, z), alpha)
    assert d.center == (1, 2)
    assert d.radius == pytest.approx(radius, abs=1e-12)
    assert d.area == pytest.approx(area, abs=1e-12)


def test_disk_spot_values_to_five_places():
    d = lighting_disk(UavPose(0, 0, 2), 30)
    assert round(d.radius, 5) == 1.15470
    assert abs(d.area - 4.18879) < 1e-5


@pytest.mark.parametrize("alpha", [0, 90, -5, 120])
def test_disk_rejects_bad_angle(alpha):
    with pytest.raises(ValueError):
        lighting_disk(UavPose(0, 0, 1), alpha)


@settings(max_examples=200)
@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(1, 80), st.floats(1, 80))
def test_disk_area_monotone(z1, z2, a1, a2):
    if z1 != z2:
        lo, hi = sorted((z1, z2))
        assert lighting_disk(UavPose(0, 0, lo), a1).area < lighting_disk(UavPose(0, 0, hi), a1).area
    if a1 != a2:
        lo, hi = sorted((a1, a2))
        assert lighting_disk(UavPose(0, 0, z1), lo).area < lighting_disk(UavPose(0, 0, z1), hi).area


def test_adjust_height_examples():
    assert adjust_height(30, 0.0, BrightnessBand(1, 1.0, 1.5)) == 1.0
    assert adjust_height(45, 1.2, BrightnessBand(1, 1.0, 2.0)) == pytest.approx(1.2)
    with pytest.raises(InfeasibleHeightError) as info:
        adjust_height(45, 3.0, BrightnessBand(1, 1.0, 2.0))
    assert info.value.required == pytest.approx(3.0)


@settings(max_examples=1000)
@given(alpha=st.floats(5, 80), d_max=st.floats(0, 5),
       band=st.sampled_from(DEFAULT_BANDS + (BrightnessBand(1, 0.5, 4.0),)))
def test_adjust_height_coverage_and_minimality(alpha, d_max, band):
    t = math.tan(math.radians(alpha))
    try:
        h = adjust_height(alpha, d_max, band)
    except InfeasibleHeightError:
        assert d_max / t > band.h_max
        return
    assert band.h_min <= h <= band.h_max
    assert d_max <= h * t + 1e-9
    lower = h - 1e-6
    assert lower < band.h_min or d_max > lower * t


def test_covers_and_governing_band():
    users = [user(1, 0, 3), user(-1, 0, 1)]
    assert governing_band(users, DEFAULT_BANDS).beta == 1
    h = 1 / math.tan(math.radians(30))
    assert covers(UavPose(0, 0, h), 30, users)
    assert not covers(UavPose(0, 0, h * 0.99), 30, users)


@settings(max_examples=200)
@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100))
def test_distance_metric(ax, ay, bx, by):
    d = horizontal_distance(UavPose(ax, ay, 3), user(bx, by))
    assert d == horizontal_distance(UavPose(bx, by, 0), user(ax, ay))
    assert (d == 0) == (ax == bx and ay == by)
