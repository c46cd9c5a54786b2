"""DEM-derived UGV obstacle maps, map fusion, and mappable-region extraction.

The obstacle map reduces the DEM to coarse pixels; a pixel is occupied
when any pair of DEM cells inside its block (extended by a one-cell
border shared with its neighbors) violates the passability rule
|dh| <= max(tan(max_slope) * dist, max_step).  The rule lets the robot
hop a bounded vertical step regardless of slope while long grades stay
bounded by the slope limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import ConfigError, ExtentError
from .geo import BinaryGrid, Dem, RegionPolygon, points_in_region, ring_signed_area
from .gridding import marching_squares, simplify_polygon

PROV_TERRAIN = 1
PROV_OUTSIDE_ROI = 2
PROV_MANUAL = 4


@dataclass(frozen=True)
class ObstacleConfig:
    max_slope_deg: float = 16.0
    max_step: float = 0.16
    pixel_size: float = 0.518

    def __post_init__(self):
        if not (0 < self.max_slope_deg < 90):
            raise ConfigError("max_slope_deg must be in (0, 90)")
        if self.max_step < 0:
            raise ConfigError("max_step must be >= 0")
        if self.pixel_size <= 0:
            raise ConfigError("pixel_size must be positive")

    def block_factor(self, dem_cell: float) -> int:
        k = self.pixel_size / dem_cell
        ki = int(round(k))
        if ki < 1 or abs(k - ki) > 1e-6:
            raise ConfigError("pixel_size must be an integer multiple of the DEM cell size")
        return ki


def obstacle_map(dem: Dem, cfg: ObstacleConfig) -> BinaryGrid:
    """Binary UGV obstacle map at the configured pixel size.

    All DEM cell pairs whose endpoints both fall inside a pixel's
    extended block are checked against the passability rule; one failing
    pair marks the pixel occupied.
    """
    k = cfg.block_factor(dem.cell_size)
    rows_p = dem.rows // k
    cols_p = dem.cols // k
    if rows_p < 1 or cols_p < 1:
        raise ConfigError("DEM too small for a single obstacle pixel")
    tan_slope = math.tan(math.radians(cfg.max_slope_deg))
    h = dem.heights
    occupied = np.zeros((rows_p, cols_p), dtype=bool)
    # pair offsets: every (di, dj) with both endpoints inside a (k+2)^2 block
    for di in range(0, k + 2):
        for dj in range(-(k + 1), k + 2):
            if di == 0 and dj <= 0:
                continue
            dist = dem.cell_size * math.hypot(di, dj)
            limit = max(tan_slope * dist, cfg.max_step)
            if dj >= 0:
                diff = np.abs(h[di:, dj:] - h[: dem.rows - di, : dem.cols - dj])
            else:
                # pair (i+di, c) with (i, c+|dj|); min corner stays at (i, c)
                diff = np.abs(h[di:, : dem.cols + dj] - h[: dem.rows - di, -dj:])
            viol = diff > limit + 1e-12
            if not viol.any():
                continue
            # violations indexed by the pair's min corner, in a full-size array
            v = np.zeros((dem.rows, dem.cols), dtype=bool)
            v[: viol.shape[0], : viol.shape[1]] = viol
            adj = abs(dj)
            win_r = k + 2 - di
            win_c = k + 2 - adj
            # pad so the window anchored at (pixel_row*k - 1, pixel_col*k - 1)
            # becomes index (pixel_row*k, pixel_col*k) in the padded frame
            vp = np.pad(v, ((1, win_r), (1, win_c)), constant_values=False)
            sw = sliding_window_view(vp, (win_r, win_c))
            sel = sw[: rows_p * k : k, : cols_p * k : k]
            occupied |= sel.any(axis=(2, 3))
    return BinaryGrid(dem.origin_x, dem.origin_y, cfg.pixel_size, occupied)


@dataclass(frozen=True)
class FusedMap:
    """Occupancy grid plus per-cell provenance bits."""

    grid: BinaryGrid
    provenance: np.ndarray  # uint8 bitmask: terrain/outside_roi/manual

    def __post_init__(self):
        p = np.asarray(self.provenance, dtype=np.uint8)
        if p.shape != self.grid.occupied.shape:
            raise ConfigError("provenance shape must match the grid")
        p = np.ascontiguousarray(p)
        p.flags.writeable = False
        object.__setattr__(self, "provenance", p)


def _extents_overlap(a: BinaryGrid, b: BinaryGrid) -> bool:
    ax0, ay0, ax1, ay1 = a.extent
    bx0, by0, bx1, by1 = b.extent
    return not (ax1 <= bx0 or bx1 <= ax0 or ay1 <= by0 or by1 <= ay0)


def resample_nearest(src: BinaryGrid, like: BinaryGrid, outside: bool = True) -> np.ndarray:
    """Nearest-cell resampling of src occupancy onto like's geometry."""
    gx, gy = like.cell_centers()
    j = np.floor((gx - src.origin_x) / src.cell_size).astype(int)
    i = np.floor((gy - src.origin_y) / src.cell_size).astype(int)
    valid = (i >= 0) & (i < src.rows) & (j >= 0) & (j < src.cols)
    out = np.full(gx.shape, outside, dtype=bool)
    out[valid] = src.occupied[i[valid], j[valid]]
    return out


def fuse_maps(roi: BinaryGrid, obstacles: BinaryGrid) -> FusedMap:
    """Per-cell OR of the ROI grid and the resampled obstacle map.

    A cell is free only when free in both sources; cells outside the
    obstacle map's coverage count as occupied (unknown terrain).
    """
    if not _extents_overlap(roi, obstacles):
        raise ExtentError("ROI and obstacle map extents do not overlap")
    obs = resample_nearest(obstacles, roi, outside=True)
    occupied = roi.occupied | obs
    prov = np.zeros(occupied.shape, dtype=np.uint8)
    prov[roi.occupied] |= PROV_OUTSIDE_ROI
    prov[obs] |= PROV_TERRAIN
    return FusedMap(BinaryGrid(roi.origin_x, roi.origin_y, roi.cell_size, occupied), prov)


def apply_manual_obstacles(fused: FusedMap, polys: list[RegionPolygon]) -> FusedMap:
    """Occupy every cell whose center falls inside an operator polygon."""
    if not polys:
        return fused
    g = fused.grid
    gx, gy = g.cell_centers()
    occupied = g.occupied.copy()
    prov = fused.provenance.copy()
    for p in polys:
        mask = points_in_region(p, gx, gy)
        occupied |= mask
        prov[mask] |= PROV_MANUAL
    return FusedMap(BinaryGrid(g.origin_x, g.origin_y, g.cell_size, occupied), prov)


def roi_grid_from_polygons(polys: list[RegionPolygon], origin_x: float, origin_y: float,
                           rows: int, cols: int, cell_size: float) -> BinaryGrid:
    """Occupancy grid that is free exactly inside the given ROI polygons."""
    xs = origin_x + (np.arange(cols) + 0.5) * cell_size
    ys = origin_y + (np.arange(rows) + 0.5) * cell_size
    gx, gy = np.meshgrid(xs, ys)
    free = np.zeros((rows, cols), dtype=bool)
    for p in polys:
        free |= points_in_region(p, gx, gy)
    return BinaryGrid(origin_x, origin_y, cell_size, ~free)


def extract_regions(fused: FusedMap, min_area: float, max_vertices: int = 32) -> list[RegionPolygon]:
    """Mappable regions (envelope + holes) from the fused map.

    Free cells are grouped with 8-connectivity; components below
    min_area (m^2) are dropped; each component's outline and enclosed
    occupied islands are contoured and reduced to max_vertices.
    """
    g = fused.grid
    free = ~g.occupied
    labels, n = ndimage.label(free, structure=np.ones((3, 3), dtype=bool))
    cell_area = g.cell_size**2
    regions = []
    for comp_id in range(1, n + 1):
        comp = labels == comp_id
        if comp.sum() * cell_area < min_area:
            continue
        rings = marching_squares(
            comp.astype(float), 0.5, valid=None,
            origin_x=g.origin_x, origin_y=g.origin_y, cell_size=g.cell_size,
        )
        envelope = None
        best = 0.0
        holes = []
        for ring in rings:
            area = ring_signed_area(ring)
            if area > 0:
                if area > best:
                    if envelope is not None:
                        holes.append(envelope)  # defensive; one CCW ring per component
                    envelope = ring
                    best = area
            else:
                holes.append(ring)
        if envelope is None:
            continue
        regions.append(
            RegionPolygon(
                simplify_polygon(envelope, max_vertices),
                tuple(simplify_polygon(h, max_vertices) for h in holes),
            )
        )
    return regions


def fusedmap_to_dict(fused: FusedMap) -> dict:
    from .geo import binarygrid_to_dict

    d = binarygrid_to_dict(fused.grid)
    d["provenance_rle"] = [_rle_values_encode(row) for row in fused.provenance]
    return d


def fusedmap_from_dict(d: dict) -> FusedMap:
    from .geo import binarygrid_from_dict

    grid = binarygrid_from_dict(d)
    prov = np.stack([_rle_values_decode(r, grid.cols) for r in d["provenance_rle"]]) if grid.rows else np.zeros((0, grid.cols), np.uint8)
    return FusedMap(grid, prov)


def _rle_values_encode(row: np.ndarray) -> list[list[int]]:
    runs = []
    current = None
    count = 0
    for v in row:
        v = int(v)
        if v == current:
            count += 1
        else:
            if current is not None:
                runs.append([current, count])
            current, count = v, 1
    if current is not None:
        runs.append([current, count])
    return runs


def _rle_values_decode(runs: list[list[int]], cols: int) -> np.ndarray:
    out = np.zeros(cols, dtype=np.uint8)
    pos = 0
    for value, count in runs:
        out[pos : pos + count] = value
        pos += count
    return out
