"""Scattered measurements to intensity grids and hotspot regions.

Pipeline: sum consecutive spectra to even out the sample density, build
a piecewise-linear grid over the Delaunay triangulation, derive the
two-stage adaptive thresholds from the dataset statistics, contour the
above-threshold cells with marching squares (optionally after an
erode/dilate pass with a disc structuring element), reject contours that
enclose too few raw samples, and reduce each surviving contour to a
small polygon by repeatedly dropping its least important vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.interpolate import LinearNDInterpolator
from scipy.spatial import QhullError

from .errors import ConfigError, DataError, GeometryError
from .fieldsim import Measurement
from .geo import GridMap, RegionPolygon, points_in_ring, ring_signed_area


# ---------------------------------------------------------------------------
# Downsampling
# ---------------------------------------------------------------------------


def downsample_by_summing(ms: list[Measurement], n: int) -> list[Measurement]:
    """Sum groups of n consecutive measurements into one.

    Counts (and window counts) are summed; positions, heights and times
    are averaged.  A trailing remainder shorter than n is dropped.
    """
    if n < 1:
        raise ConfigError("group size must be >= 1")
    if n == 1:
        return list(ms)
    out = []
    for k in range(0, len(ms) - n + 1, n):
        group = ms[k : k + n]
        has_windows = all(m.w_cs is not None and m.w_co is not None for m in group)
        out.append(
            Measurement(
                t=sum(m.t for m in group) / n,
                x=sum(m.x for m in group) / n,
                y=sum(m.y for m in group) / n,
                z_agl=sum(m.z_agl for m in group) / n,
                counts=sum(m.counts for m in group),
                dose_rate=sum(m.dose_rate for m in group) / n,
                w_cs=sum(m.w_cs for m in group) if has_windows else None,
                w_co=sum(m.w_co for m in group) if has_windows else None,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Delaunay gridding
# ---------------------------------------------------------------------------


def interpolate_grid(ms: list[Measurement], cell_size: float, values=None) -> GridMap:
    """Piecewise-linear interpolation of scattered samples on a regular grid.

    Cells outside the convex hull of the samples are masked no_data.
    values overrides the interpolated quantity (defaults to counts).
    """
    if cell_size <= 0:
        raise ConfigError("cell_size must be positive")
    if len(ms) < 3:
        raise GeometryError("need at least 3 measurements to triangulate")
    pts = np.array([[m.x, m.y] for m in ms])
    vals = np.array([m.counts for m in ms]) if values is None else np.asarray(values, dtype=float)
    origin_x = float(pts[:, 0].min()) - cell_size / 2.0
    origin_y = float(pts[:, 1].min()) - cell_size / 2.0
    cols = int(math.floor((pts[:, 0].max() - pts[:, 0].min()) / cell_size)) + 1
    rows = int(math.floor((pts[:, 1].max() - pts[:, 1].min()) / cell_size)) + 1
    try:
        interp = LinearNDInterpolator(pts, vals)
    except QhullError as e:
        raise GeometryError(f"degenerate sample geometry: {e}") from e
    xs = origin_x + (np.arange(cols) + 0.5) * cell_size
    ys = origin_y + (np.arange(rows) + 0.5) * cell_size
    gx, gy = np.meshgrid(xs, ys)
    grid = interp(gx, gy)
    mask = np.isnan(grid)
    return GridMap(origin_x, origin_y, cell_size, np.where(mask, 0.0, grid), mask)


# ---------------------------------------------------------------------------
# Adaptive thresholds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdResult:
    """Two-stage statistics-derived cuts separating background and peaks."""

    t_bg: float
    t_hot: float
    mu: float
    sigma: float
    mu_bg: float
    sigma_bg: float


def adaptive_thresholds(values) -> ThresholdResult:
    """t_bg = mu + sigma/2 over all values; t_hot = mu_bg + 3*sigma_bg
    over the sub-threshold subset.  Population standard deviations.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise DataError("need at least 2 values for threshold statistics")
    mu = float(v.mean())
    sigma = float(v.std())
    t_bg = mu + sigma / 2.0
    bg = v[v <= t_bg]
    mu_bg = float(bg.mean())
    sigma_bg = float(bg.std())
    return ThresholdResult(t_bg=t_bg, t_hot=mu_bg + 3.0 * sigma_bg, mu=mu, sigma=sigma, mu_bg=mu_bg, sigma_bg=sigma_bg)


# ---------------------------------------------------------------------------
# Marching squares
# ---------------------------------------------------------------------------

# directed segments per corner-occupancy case, keeping the above-region on
# the left so rings around above-regions come out counter-clockwise.
# corners: 1=bl, 2=br, 4=tr, 8=tl; edges: B(ottom), R(ight), T(op), L(eft)
_CASES = {
    1: [("B", "L")],
    2: [("R", "B")],
    3: [("R", "L")],
    4: [("T", "R")],
    6: [("T", "B")],
    7: [("T", "L")],
    8: [("L", "T")],
    9: [("B", "T")],
    11: [("R", "T")],
    12: [("L", "R")],
    13: [("B", "R")],
    14: [("L", "B")],
}
_SADDLE_HIGH = {5: [("B", "R"), ("T", "L")], 10: [("L", "B"), ("R", "T")]}
_SADDLE_LOW = {5: [("B", "L"), ("T", "R")], 10: [("R", "B"), ("L", "T")]}


def marching_squares(values: np.ndarray, level: float, valid: np.ndarray | None = None,
                     origin_x: float = 0.0, origin_y: float = 0.0, cell_size: float = 1.0) -> list[np.ndarray]:
    """Closed iso-level contours of a scalar grid with linear interpolation.

    Grid nodes sit at cell centers.  Invalid nodes are treated as below
    the level, and the grid is padded with a below-level ring so every
    contour closes.  Saddle cells are disambiguated by the cell-average
    rule.  Returns rings as (N, 2) metric coordinate arrays; rings that
    enclose above-level regions are counter-clockwise.
    """
    v = np.asarray(values, dtype=float)
    if valid is not None:
        lowest = v[valid].min() if np.any(valid) else level
        sentinel = min(float(lowest), level) - 1.0
        v = np.where(valid, v, sentinel)
    sentinel = min(float(v.min()), level) - 1.0
    f = np.pad(v, 1, constant_values=sentinel)
    above = f >= level
    rows, cols = f.shape
    bl = above[:-1, :-1]
    br = above[:-1, 1:]
    tr = above[1:, 1:]
    tl = above[1:, :-1]
    code = bl * 1 + br * 2 + tr * 4 + tl * 8

    # coordinates of grid node (i, j) in the padded frame
    def node_x(j):
        return origin_x + (j - 0.5) * cell_size

    def node_y(i):
        return origin_y + (i - 0.5) * cell_size

    def crossing(i0, j0, i1, j1):
        a, b = f[i0, j0], f[i1, j1]
        t = 0.5 if a == b else (level - a) / (b - a)
        t = min(max(t, 0.0), 1.0)
        return (
            node_x(j0) + t * (node_x(j1) - node_x(j0)),
            node_y(i0) + t * (node_y(i1) - node_y(i0)),
        )

    # edge ids: ("h", i, j) joins nodes (i, j)-(i, j+1); ("v", i, j) joins (i, j)-(i+1, j)
    def cell_edge(i, j, side):
        if side == "B":
            return ("h", i, j)
        if side == "T":
            return ("h", i + 1, j)
        if side == "L":
            return ("v", i, j)
        return ("v", i, j + 1)

    nxt: dict = {}
    pos: dict = {}
    cells = np.argwhere((code != 0) & (code != 15))
    for i, j in cells:
        c = int(code[i, j])
        if c in (5, 10):
            avg = (f[i, j] + f[i, j + 1] + f[i + 1, j] + f[i + 1, j + 1]) / 4.0
            segs = _SADDLE_HIGH[c] if avg >= level else _SADDLE_LOW[c]
        else:
            segs = _CASES[c]
        for frm, to in segs:
            e1 = cell_edge(i, j, frm)
            e2 = cell_edge(i, j, to)
            nxt[e1] = e2
            for e in (e1, e2):
                if e not in pos:
                    kind, ei, ej = e
                    if kind == "h":
                        pos[e] = crossing(ei, ej, ei, ej + 1)
                    else:
                        pos[e] = crossing(ei, ej, ei + 1, ej)

    rings = []
    visited = set()
    for start in nxt:
        if start in visited:
            continue
        ring = []
        e = start
        while e not in visited:
            visited.add(e)
            ring.append(pos[e])
            e = nxt[e]
        if len(ring) >= 3:
            rings.append(np.asarray(ring))
    return rings


def grid_contours(grid: GridMap, level: float) -> list[np.ndarray]:
    """Marching-squares contours of a GridMap at the given iso-level."""
    return marching_squares(
        grid.values, level, valid=~grid.no_data,
        origin_x=grid.origin_x, origin_y=grid.origin_y, cell_size=grid.cell_size,
    )


# ---------------------------------------------------------------------------
# Polygon simplification
# ---------------------------------------------------------------------------


def _vertex_importance(prev_pt, pt, next_pt) -> float:
    x1 = np.asarray(pt) - np.asarray(prev_pt)
    x2 = np.asarray(next_pt) - np.asarray(pt)
    n1 = float(np.hypot(*x1))
    n2 = float(np.hypot(*x2))
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    cosang = float(np.clip(np.dot(x1, x2) / (n1 * n2), -1.0, 1.0))
    return abs(math.acos(cosang)) * n1 * n2


def simplify_polygon(ring: np.ndarray, max_vertices: int) -> np.ndarray:
    """Drop the least important vertices until at most max_vertices remain.

    Importance combines the turn angle at the vertex with the lengths of
    its incident edges, so collinear vertices score zero and go first.
    The output is an ordered subset of the input vertices.
    """
    if max_vertices < 3:
        raise ConfigError("max_vertices must be >= 3")
    pts = list(np.asarray(ring, dtype=float))
    if len(pts) > 1 and np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    while len(pts) > max_vertices:
        n = len(pts)
        imps = [_vertex_importance(pts[(k - 1) % n], pts[k], pts[(k + 1) % n]) for k in range(n)]
        pts.pop(int(np.argmin(imps)))
    return np.asarray(pts)


# ---------------------------------------------------------------------------
# Hotspot extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hotspot:
    contour: np.ndarray  # closed ring, meters
    polygon: RegionPolygon  # simplified envelope
    peak_value: float
    enclosed_samples: int


def disc_element(radius_m: float, cell_size: float) -> np.ndarray:
    """Boolean disc structuring element of the given metric radius."""
    r = radius_m / cell_size
    n = int(math.floor(r + 1e-9))
    if n < 1:
        return np.ones((1, 1), dtype=bool)
    yy, xx = np.mgrid[-n : n + 1, -n : n + 1]
    return (xx * xx + yy * yy) <= r * r + 1e-9


def extract_hotspots(
    grid: GridMap,
    thr: ThresholdResult,
    raw: list[Measurement],
    min_samples: int = 4,
    erode_r: float = 0.0,
    dilate_r: float = 0.0,
    max_vertices: int = 7,
) -> list[Hotspot]:
    """Contour the above-threshold cells into validated hotspot regions.

    With morphology configured, erosion runs first (suppressing noise
    spikes), dilation second, and the contour follows the resulting
    binary imprint; otherwise the contour is the exact t_hot iso-level.
    A hotspot is valid only if its contour encloses at least min_samples
    raw measurements.
    """
    if not np.any((~grid.no_data) & (grid.values > thr.t_hot)):
        return []  # nothing strictly exceeds the hotspot threshold
    above = (~grid.no_data) & (grid.values >= thr.t_hot)
    if erode_r > 0:
        above = ndimage.binary_erosion(above, structure=disc_element(erode_r, grid.cell_size))
    if dilate_r > 0:
        above = ndimage.binary_dilation(above, structure=disc_element(dilate_r, grid.cell_size))
    if not np.any(above):
        return []
    if erode_r > 0 or dilate_r > 0:
        rings = marching_squares(
            above.astype(float), 0.5, valid=None,
            origin_x=grid.origin_x, origin_y=grid.origin_y, cell_size=grid.cell_size,
        )
    else:
        rings = marching_squares(
            grid.values, thr.t_hot, valid=~grid.no_data,
            origin_x=grid.origin_x, origin_y=grid.origin_y, cell_size=grid.cell_size,
        )
    rx = np.array([m.x for m in raw])
    ry = np.array([m.y for m in raw])
    gx, gy = grid.cell_centers()
    out = []
    for ring in rings:
        if ring_signed_area(ring) <= 0:
            continue  # clockwise rings are holes inside a hotspot
        enclosed = int(np.count_nonzero(points_in_ring(ring, rx, ry))) if len(raw) else 0
        if enclosed < min_samples:
            continue
        xmin, ymin = ring.min(axis=0)
        xmax, ymax = ring.max(axis=0)
        box = (gx >= xmin) & (gx <= xmax) & (gy >= ymin) & (gy <= ymax) & ~grid.no_data
        if np.any(box):
            inside = points_in_ring(ring, gx[box], gy[box])
            peak = float(grid.values[box][inside].max()) if np.any(inside) else float(grid.values[box].max())
        else:
            peak = thr.t_hot
        out.append(
            Hotspot(
                contour=ring,
                polygon=RegionPolygon(simplify_polygon(ring, max_vertices)),
                peak_value=peak,
                enclosed_samples=enclosed,
            )
        )
    return out


def hotspots_to_dicts(hotspots: list[Hotspot]) -> list[dict]:
    return [
        {
            "contour": [[float(x), float(y)] for x, y in h.contour],
            "polygon": {
                "envelope": [[float(x), float(y)] for x, y in h.polygon.envelope],
                "holes": [],
            },
            "peak_value": h.peak_value,
            "enclosed_samples": h.enclosed_samples,
        }
        for h in hotspots
    ]
