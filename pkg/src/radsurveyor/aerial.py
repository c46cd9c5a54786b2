"""Aerial survey planning: lawnmower strips and DEM terrain following.

Strips are parallel lines spaced a fixed distance apart, connected
end-to-end in serpentine order.  Terrain following densifies the plan,
samples the DEM under every waypoint, low-pass filters the terrain
profile and offsets it by the requested AGL height, so only the vertical
coordinate is ever modified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geo import Dem, RegionPolygon, Trajectory, dem_sample_array


def worst_case_distance(a: float, h: float) -> float:
    """Source-to-detector distance when the source sits mid-strip.

    a is the strip spacing, h the AGL flight height; the worst case is
    sqrt((a/2)^2 + h^2).
    """
    if a < 0 or h <= 0:
        raise ConfigError("spacing must be >= 0 and height positive")
    return math.hypot(a / 2.0, h)


@dataclass(frozen=True)
class StripPlanConfig:
    area: RegionPolygon
    strip_spacing: float
    heading: float = 0.0  # radians, direction of the survey lines
    speed: float = 2.0
    sampling_period: float = 1.0

    def __post_init__(self):
        if self.strip_spacing <= 0:
            raise ConfigError("strip_spacing must be positive")
        if self.speed <= 0 or self.sampling_period <= 0:
            raise ConfigError("speed and sampling_period must be positive")


@dataclass(frozen=True)
class TerrainFollowConfig:
    agl_height: float
    segment_size: float
    filter_window: int = 5
    sample_mode: str = "bilinear"  # "nearest" replicates the strict per-point lookup

    def __post_init__(self):
        if self.agl_height <= 0:
            raise ConfigError("agl_height must be positive")
        if self.segment_size <= 0:
            raise ConfigError("segment_size must be positive")
        if self.filter_window < 1 or self.filter_window % 2 == 0:
            raise ConfigError("filter_window must be odd and >= 1")


def plan_strips(cfg: StripPlanConfig) -> Trajectory:
    """Serpentine strip plan over the area's bounding extent.

    Lines run along the heading; they are spaced strip_spacing apart in
    the perpendicular direction with the first line inset by half a
    spacing.  An area narrower than one spacing yields a single center
    line.  z is left at 0 (2-D plan).
    """
    a = cfg.strip_spacing
    c, s = math.cos(cfg.heading), math.sin(cfg.heading)
    verts = cfg.area.envelope
    u = verts[:, 0] * c + verts[:, 1] * s
    v = -verts[:, 0] * s + verts[:, 1] * c
    umin, umax = float(u.min()), float(u.max())
    vmin, vmax = float(v.min()), float(v.max())
    width = vmax - vmin
    offsets = []
    k = 0
    while True:
        off = a / 2.0 + k * a
        if off > width + 1e-9:
            break
        offsets.append(vmin + off)
        k += 1
    if not offsets:
        offsets = [(vmin + vmax) / 2.0]
    wp = []
    for idx, voff in enumerate(offsets):
        ends = (umin, umax) if idx % 2 == 0 else (umax, umin)
        for uu in ends:
            wp.append((uu * c - voff * s, uu * s + voff * c, 0.0))
    return Trajectory(np.asarray(wp), cfg.speed, cfg.sampling_period)


def _segment_polyline(waypoints: np.ndarray, s: float) -> np.ndarray:
    """Split each leg into equal pieces no longer than s, keeping corners."""
    pts = [waypoints[0]]
    for k in range(len(waypoints) - 1):
        p, q = waypoints[k], waypoints[k + 1]
        length = math.hypot(q[0] - p[0], q[1] - p[1])
        n = max(1, int(math.ceil(length / s - 1e-9)))
        for j in range(1, n + 1):
            pts.append(p + (q - p) * (j / n))
    return np.asarray(pts)


def _moving_average_shrink(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average whose window shrinks symmetrically at the ends."""
    if window == 1:
        return values.copy()
    half = window // 2
    n = len(values)
    out = np.empty(n)
    for i in range(n):
        k = min(half, i, n - 1 - i)
        out[i] = values[i - k : i + k + 1].mean()
    return out


def adjust_terrain_following(traj2d: Trajectory, dem: Dem, cfg: TerrainFollowConfig) -> Trajectory:
    """Constant-AGL altitude profile for a 2-D plan (DEM-based adjustment).

    Steps: densify to <= segment_size, look up the terrain height under
    every point, add the AGL height, and low-pass filter.  The filter is
    applied to the terrain-height sequence (the AGL offset is constant,
    so filtering before or after the offset only differs by h).
    """
    pts = _segment_polyline(traj2d.waypoints, cfg.segment_size)
    terrain = dem_sample_array(dem, pts[:, 0], pts[:, 1], cfg.sample_mode)
    smooth = _moving_average_shrink(np.asarray(terrain, dtype=float), cfg.filter_window)
    out = pts.copy()
    out[:, 2] = smooth + cfg.agl_height
    return Trajectory(out, traj2d.speed, traj2d.sampling_period)


def agl_profile(traj3d: Trajectory, dem: Dem, target_h: float, sample_mode: str = "bilinear"):
    """Per-waypoint (arc_length, AGL) profile plus RMS deviation from target_h."""
    wp = traj3d.waypoints
    terrain = dem_sample_array(dem, wp[:, 0], wp[:, 1], sample_mode)
    agl = wp[:, 2] - terrain
    arc = np.concatenate([[0.0], np.cumsum(traj3d.xy_lengths)])
    rms = float(np.sqrt(np.mean((agl - target_h) ** 2)))
    return np.stack([arc, agl], axis=1), rms
