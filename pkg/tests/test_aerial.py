"""Tests for strip planning and DEM terrain following."""

import math

import numpy as np
import pytest

from radsurveyor import aerial, fieldsim, geo
from radsurveyor.aerial import StripPlanConfig, TerrainFollowConfig


def rect_area(w=140.0, h=135.0):
    return geo.RegionPolygon(np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]]))


# ---------------------------------------------------------------------------
# worst_case_distance
# ---------------------------------------------------------------------------


def test_worst_case_distance_reference_setting():
    d = aerial.worst_case_distance(10.0, 15.0)
    assert d == pytest.approx(15.811, abs=1e-3)
    # 5.4 % above the flight height
    assert (d / 15.0 - 1.0) * 100 == pytest.approx(5.4, abs=0.1)


def test_worst_case_distance_trivia():
    assert aerial.worst_case_distance(0.0, 15.0) == pytest.approx(15.0)
    h = 7.3
    assert aerial.worst_case_distance(2 * h, h) == pytest.approx(h * math.sqrt(2))


# ---------------------------------------------------------------------------
# plan_strips
# ---------------------------------------------------------------------------


def test_plan_strips_two_zone_trial():
    cfg = StripPlanConfig(area=rect_area(140, 135), strip_spacing=10.0, heading=0.0)
    traj = aerial.plan_strips(cfg)
    wp = traj.waypoints
    # 14 strips of length 140 each
    assert len(wp) == 28
    ys = sorted(set(round(y, 6) for y in wp[:, 1]))
    assert len(ys) == 14
    assert ys[0] == pytest.approx(5.0)
    assert ys[-1] == pytest.approx(135.0)
    for k in range(0, 28, 2):
        seg = abs(wp[k + 1, 0] - wp[k, 0])
        assert seg == pytest.approx(140.0)


def test_plan_strips_narrow_area_single_line():
    # narrower than one spacing: a single line, at the half-spacing inset
    cfg = StripPlanConfig(area=rect_area(50, 6.0), strip_spacing=10.0)
    traj = aerial.plan_strips(cfg)
    assert len(traj.waypoints) == 2
    assert traj.waypoints[0, 1] == pytest.approx(5.0)
    # narrower than even the inset: one centered line
    cfg = StripPlanConfig(area=rect_area(50, 4.0), strip_spacing=10.0)
    traj = aerial.plan_strips(cfg)
    assert len(traj.waypoints) == 2
    assert traj.waypoints[0, 1] == pytest.approx(2.0)


def test_plan_strips_serpentine():
    cfg = StripPlanConfig(area=rect_area(100, 45), strip_spacing=10.0)
    wp = aerial.plan_strips(cfg).waypoints
    directions = [np.sign(wp[k + 1, 0] - wp[k, 0]) for k in range(0, len(wp), 2)]
    for a, b in zip(directions, directions[1:]):
        assert a == -b


def test_plan_strips_rotated_heading():
    cfg = StripPlanConfig(area=rect_area(100, 45), strip_spacing=10.0, heading=math.pi / 2)
    wp = aerial.plan_strips(cfg).waypoints
    # lines now run along y, spaced across x
    xs = sorted(set(round(x, 6) for x in wp[:, 0]))
    assert len(xs) == math.floor(100 / 10) or len(xs) == math.floor(100 / 10) + 1
    for k in range(0, len(wp), 2):
        assert abs(wp[k + 1, 1] - wp[k, 1]) == pytest.approx(45.0)


def test_plan_strips_covers_area():
    # every interior point within spacing/2 (+inset tolerance) of a line
    a = 8.0
    cfg = StripPlanConfig(area=rect_area(60, 37), strip_spacing=a)
    wp = aerial.plan_strips(cfg).waypoints
    line_ys = np.array(sorted(set(wp[:, 1])))
    rng = np.random.default_rng(0)
    for _ in range(500):
        y = rng.uniform(0, 37)
        assert np.min(np.abs(line_ys - y)) <= a / 2 + 1e-6


# ---------------------------------------------------------------------------
# adjust_terrain_following
# ---------------------------------------------------------------------------


def test_flat_dem_constant_altitude():
    dem = geo.Dem(0.0, 0.0, 1.0, np.zeros((60, 60)))
    plan = geo.Trajectory(np.array([[5.0, 5.0, 0.0], [50.0, 5.0, 0.0], [50.0, 50.0, 0.0]]), 2.0, 1.0)
    cfg = TerrainFollowConfig(agl_height=15.0, segment_size=10.0)
    traj = aerial.adjust_terrain_following(plan, dem, cfg)
    assert np.all(traj.waypoints[:, 2] == pytest.approx(15.0))


def test_segmentation_arithmetic():
    dem = geo.Dem(0.0, 0.0, 1.0, np.zeros((20, 120)))
    plan = geo.Trajectory(np.array([[2.0, 10.0, 0.0], [102.0, 10.0, 0.0]]), 2.0, 1.0)
    cfg = TerrainFollowConfig(agl_height=15.0, segment_size=10.0, filter_window=1)
    traj = aerial.adjust_terrain_following(plan, dem, cfg)
    assert len(traj.waypoints) == 11
    # consecutive spacing <= s and total length preserved
    seg = traj.xy_lengths
    assert np.all(seg <= 10.0 + 1e-9)
    assert seg.sum() == pytest.approx(100.0, rel=1e-9)


def test_corners_preserved():
    dem = geo.Dem(0.0, 0.0, 1.0, np.zeros((60, 60)))
    corners = np.array([[5.0, 5.0, 0.0], [48.0, 5.0, 0.0], [48.0, 50.0, 0.0]])
    plan = geo.Trajectory(corners, 2.0, 1.0)
    cfg = TerrainFollowConfig(agl_height=10.0, segment_size=7.0)
    traj = aerial.adjust_terrain_following(plan, dem, cfg)
    for c in corners:
        assert np.any(np.all(np.isclose(traj.waypoints[:, :2], c[:2], atol=1e-9), axis=1))


def test_unfiltered_following_exact_agl():
    # with filter_window=1 the AGL equals h exactly at every waypoint
    dem = fieldsim.synth_terrain(
        {
            "width": 100,
            "height": 40,
            "cell_size": 1.0,
            "features": [{"type": "ramp", "direction_deg": 0, "start": 20, "span": 50, "slope_deg": 8}],
        }
    )
    plan = geo.Trajectory(np.array([[5.0, 20.0, 0.0], [95.0, 20.0, 0.0]]), 2.0, 1.0)
    cfg = TerrainFollowConfig(agl_height=15.0, segment_size=5.0, filter_window=1)
    traj = aerial.adjust_terrain_following(plan, dem, cfg)
    profile, rms = aerial.agl_profile(traj, dem, 15.0)
    assert np.all(np.abs(profile[:, 1] - 15.0) < 1e-9)
    assert rms < 1e-9


def test_filtered_step_terrain_bounded_error():
    # low-pass filtering over a step: AGL deviation never exceeds step height
    step_h = 2.0
    dem = fieldsim.synth_terrain(
        {
            "width": 100,
            "height": 40,
            "cell_size": 1.0,
            "features": [{"type": "step", "direction_deg": 0, "at": 50, "height": step_h}],
        }
    )
    plan = geo.Trajectory(np.array([[5.0, 20.0, 0.0], [95.0, 20.0, 0.0]]), 2.0, 1.0)
    cfg = TerrainFollowConfig(agl_height=15.0, segment_size=2.0, filter_window=7)
    traj = aerial.adjust_terrain_following(plan, dem, cfg)
    profile, _ = aerial.agl_profile(traj, dem, 15.0)
    # direct evaluation oracle: AGL = z - dem must stay within the step band
    assert np.max(np.abs(profile[:, 1] - 15.0)) <= step_h + 1e-9


def test_filter_preserves_mean_height():
    rng = np.random.default_rng(8)
    dem = geo.Dem(0.0, 0.0, 1.0, rng.uniform(0, 4, (40, 120)))
    plan = geo.Trajectory(np.array([[2.0, 20.0, 0.0], [115.0, 20.0, 0.0]]), 2.0, 1.0)
    raw = aerial.adjust_terrain_following(plan, dem, TerrainFollowConfig(15.0, 2.0, 1))
    smooth = aerial.adjust_terrain_following(plan, dem, TerrainFollowConfig(15.0, 2.0, 7))
    n = len(raw.waypoints)
    # interior means agree; endpoint windows shrink, so allow one window's worth
    diff = abs(raw.waypoints[:, 2].mean() - smooth.waypoints[:, 2].mean())
    assert diff < 7 * np.ptp(dem.heights) / n


def test_two_zone_trial_waypoint_count():
    # 14 strips x 140 m + 13 connectors x 10 m, segmented at s=10
    dem = geo.Dem(0.0, 0.0, 1.0, np.zeros((135, 140)))
    cfg = StripPlanConfig(area=rect_area(140, 135), strip_spacing=10.0)
    plan = aerial.plan_strips(cfg)
    traj = aerial.adjust_terrain_following(plan, dem, TerrainFollowConfig(15.0, 10.0))
    assert 205 <= len(traj.waypoints) <= 213


def test_filter_window_validation():
    with pytest.raises(Exception):
        TerrainFollowConfig(15.0, 10.0, filter_window=4)
