"""Shared geometric primitives: grids, polygons, trajectories.

All coordinates live in a local planar metric frame (east/north meters
from a configured origin); there is no geodetic math anywhere in the
package.  Grid cell (i, j) has its center at
(origin_x + (j + 0.5) * cell_size, origin_y + (i + 0.5) * cell_size)
with row index i increasing northwards.

All types are immutable after construction and every operation here is
pure, so unrestricted concurrent reads are safe.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ExtentError, GeometryError

EPS = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dem:
    """Regular elevation grid with a geolocated origin.

    heights is a (rows, cols) array of elevations in meters MSL.
    """

    origin_x: float
    origin_y: float
    cell_size: float
    heights: np.ndarray

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ConfigError("cell_size must be positive")
        h = np.asarray(self.heights, dtype=float)
        if h.ndim != 2 or h.shape[0] < 1 or h.shape[1] < 1:
            raise ConfigError("heights must be a non-empty 2-D array")
        if not np.all(np.isfinite(h)):
            raise ConfigError("all heights must be finite")
        object.__setattr__(self, "heights", _freeze(h))

    @property
    def rows(self) -> int:
        return self.heights.shape[0]

    @property
    def cols(self) -> int:
        return self.heights.shape[1]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1) outer bounds of the covered area."""
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.cols * self.cell_size,
            self.origin_y + self.rows * self.cell_size,
        )

    def contains(self, x, y) -> bool:
        x0, y0, x1, y1 = self.extent
        return (x0 - EPS <= x <= x1 + EPS) and (y0 - EPS <= y <= y1 + EPS)


@dataclass(frozen=True)
class GridMap:
    """Regular scalar grid; masked cells carry no value semantics."""

    origin_x: float
    origin_y: float
    cell_size: float
    values: np.ndarray
    no_data: np.ndarray

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ConfigError("cell_size must be positive")
        v = np.asarray(self.values, dtype=float)
        m = np.asarray(self.no_data, dtype=bool)
        if v.ndim != 2 or v.shape != m.shape:
            raise ConfigError("values and no_data must be matching 2-D arrays")
        object.__setattr__(self, "values", _freeze(v))
        object.__setattr__(self, "no_data", _freeze(m))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays (xs, ys) of all cell centers, shape (rows, cols)."""
        xs = self.origin_x + (np.arange(self.cols) + 0.5) * self.cell_size
        ys = self.origin_y + (np.arange(self.rows) + 0.5) * self.cell_size
        return np.meshgrid(xs, ys)


@dataclass(frozen=True)
class BinaryGrid:
    """Regular occupancy grid; True means occupied / not mappable."""

    origin_x: float
    origin_y: float
    cell_size: float
    occupied: np.ndarray

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ConfigError("cell_size must be positive")
        occ = np.asarray(self.occupied, dtype=bool)
        if occ.ndim != 2:
            raise ConfigError("occupied must be a 2-D array")
        object.__setattr__(self, "occupied", _freeze(occ))

    @property
    def rows(self) -> int:
        return self.occupied.shape[0]

    @property
    def cols(self) -> int:
        return self.occupied.shape[1]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.cols * self.cell_size,
            self.origin_y + self.rows * self.cell_size,
        )

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (
            self.origin_x + (j + 0.5) * self.cell_size,
            self.origin_y + (i + 0.5) * self.cell_size,
        )

    def index_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell (i, j) containing the point; clipped to the grid."""
        j = int(np.clip(math.floor((x - self.origin_x) / self.cell_size), 0, self.cols - 1))
        i = int(np.clip(math.floor((y - self.origin_y) / self.cell_size), 0, self.rows - 1))
        return i, j

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin_x + (np.arange(self.cols) + 0.5) * self.cell_size
        ys = self.origin_y + (np.arange(self.rows) + 0.5) * self.cell_size
        return np.meshgrid(xs, ys)


# ---------------------------------------------------------------------------
# Polygons
# ---------------------------------------------------------------------------


def ring_signed_area(ring: np.ndarray) -> float:
    """Shoelace signed area; positive for counter-clockwise rings."""
    r = np.asarray(ring, dtype=float)
    x, y = r[:, 0], r[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _as_ring(ring) -> np.ndarray:
    r = np.asarray(ring, dtype=float)
    if r.ndim != 2 or r.shape[1] != 2:
        raise GeometryError("a ring must be an (N, 2) vertex array")
    # tolerate an explicitly closed ring on input
    if len(r) > 1 and np.allclose(r[0], r[-1]):
        r = r[:-1]
    if len(r) < 3:
        raise GeometryError("a ring needs at least 3 distinct vertices")
    return r


@dataclass(frozen=True)
class RegionPolygon:
    """Envelope ring plus hole rings in metric coordinates.

    The envelope is normalized to counter-clockwise orientation and the
    holes to clockwise at construction time.
    """

    envelope: np.ndarray
    holes: tuple = ()

    def __post_init__(self):
        env = _as_ring(self.envelope)
        if abs(ring_signed_area(env)) < EPS:
            raise GeometryError("envelope has zero area")
        if ring_signed_area(env) < 0:
            env = env[::-1]
        hs = []
        for h in self.holes:
            hr = _as_ring(h)
            if ring_signed_area(hr) > 0:
                hr = hr[::-1]
            hs.append(_freeze(hr))
        object.__setattr__(self, "envelope", _freeze(env))
        object.__setattr__(self, "holes", tuple(hs))


def polygon_area(p: RegionPolygon) -> float:
    """Envelope area minus hole areas (shoelace), in m^2."""
    area = abs(ring_signed_area(p.envelope))
    for h in p.holes:
        area -= abs(ring_signed_area(h))
    return max(area, 0.0)


def ring_centroid(ring: np.ndarray) -> tuple[float, float]:
    """Area-weighted centroid of a simple ring."""
    r = _as_ring(ring)
    x, y = r[:, 0], r[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-15:
        return float(x.mean()), float(y.mean())
    cx = float(((x + xn) * cross).sum() / (6.0 * a))
    cy = float(((y + yn) * cross).sum() / (6.0 * a))
    return cx, cy


def points_on_ring(ring: np.ndarray, xs: np.ndarray, ys: np.ndarray, eps: float = EPS) -> np.ndarray:
    """Boolean mask: which points lie on the ring's boundary."""
    r = np.asarray(ring, dtype=float)
    px = np.asarray(xs, dtype=float).ravel()
    py = np.asarray(ys, dtype=float).ravel()
    on = np.zeros(px.shape, dtype=bool)
    n = len(r)
    for k in range(n):
        ax, ay = r[k]
        bx, by = r[(k + 1) % n]
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        if seg2 < eps * eps:
            on |= (np.abs(px - ax) <= eps) & (np.abs(py - ay) <= eps)
            continue
        cross = dx * (py - ay) - dy * (px - ax)
        dot = (px - ax) * dx + (py - ay) * dy
        seg = math.sqrt(seg2)
        on |= (np.abs(cross) <= eps * seg) & (dot >= -eps * seg) & (dot <= seg2 + eps * seg)
    return on.reshape(np.shape(xs))


def points_in_ring(ring: np.ndarray, xs: np.ndarray, ys: np.ndarray, boundary: bool = True) -> np.ndarray:
    """Even-odd containment test for many points at once.

    With boundary=True points on the ring count as inside (the package's
    deterministic tie-break).
    """
    r = np.asarray(ring, dtype=float)
    px = np.asarray(xs, dtype=float).ravel()
    py = np.asarray(ys, dtype=float).ravel()
    inside = np.zeros(px.shape, dtype=bool)
    n = len(r)
    for k in range(n):
        ax, ay = r[k]
        bx, by = r[(k + 1) % n]
        crosses = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (py - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (px < xint)
    if boundary:
        inside |= points_on_ring(r, px, py)
    return inside.reshape(np.shape(xs))


def point_in_region(p: RegionPolygon, x: float, y: float) -> bool:
    """True iff (x, y) is inside the envelope and outside all holes.

    Boundary points (envelope or hole rings) count as inside.
    """
    xs = np.array([x])
    ys = np.array([y])
    if bool(points_on_ring(p.envelope, xs, ys)[0]):
        return True
    for h in p.holes:
        if bool(points_on_ring(h, xs, ys)[0]):
            return True
    if not bool(points_in_ring(p.envelope, xs, ys, boundary=False)[0]):
        return False
    for h in p.holes:
        if bool(points_in_ring(h, xs, ys, boundary=False)[0]):
            return False
    return True


def points_in_region(p: RegionPolygon, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized point_in_region over arrays of coordinates."""
    inside = points_in_ring(p.envelope, xs, ys, boundary=True)
    boundary = points_on_ring(p.envelope, xs, ys)
    for h in p.holes:
        hb = points_on_ring(h, xs, ys)
        inside &= ~points_in_ring(h, xs, ys, boundary=False) | hb
        boundary |= hb
    return inside | boundary


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Ordered 3-D waypoints plus the platform's motion/sampling parameters."""

    waypoints: np.ndarray
    speed: float
    sampling_period: float

    def __post_init__(self):
        w = np.asarray(self.waypoints, dtype=float)
        if w.ndim != 2 or w.shape[1] != 3 or w.shape[0] < 2:
            raise ConfigError("waypoints must be an (N>=2, 3) array")
        if self.speed <= 0:
            raise ConfigError("speed must be positive")
        if self.sampling_period <= 0:
            raise ConfigError("sampling_period must be positive")
        object.__setattr__(self, "waypoints", _freeze(w))

    @property
    def xy_lengths(self) -> np.ndarray:
        """Horizontal length of each waypoint-to-waypoint segment."""
        d = np.diff(self.waypoints[:, :2], axis=0)
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def length(self) -> float:
        """Total horizontal path length in meters."""
        return float(self.xy_lengths.sum())

    def point_at(self, dist: float) -> np.ndarray:
        """Interpolated (x, y, z) at horizontal arc length dist."""
        seg = self.xy_lengths
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        d = float(np.clip(dist, 0.0, cum[-1]))
        k = int(np.searchsorted(cum, d, side="right") - 1)
        k = min(k, len(seg) - 1)
        t = 0.0 if seg[k] == 0 else (d - cum[k]) / seg[k]
        return self.waypoints[k] + t * (self.waypoints[k + 1] - self.waypoints[k])


# ---------------------------------------------------------------------------
# DEM sampling
# ---------------------------------------------------------------------------


def dem_sample_array(dem: Dem, xs, ys, mode: str = "bilinear") -> np.ndarray:
    """Terrain height at many points; bilinear by default.

    Points inside the outer half-cell ring are clamped onto the border
    cell centers, which keeps the field continuous up to the extent edge.
    """
    px = np.asarray(xs, dtype=float)
    py = np.asarray(ys, dtype=float)
    x0, y0, x1, y1 = dem.extent
    if np.any(px < x0 - EPS) or np.any(px > x1 + EPS) or np.any(py < y0 - EPS) or np.any(py > y1 + EPS):
        raise ExtentError("query point outside DEM extent")
    gx = (px - dem.origin_x) / dem.cell_size - 0.5
    gy = (py - dem.origin_y) / dem.cell_size - 0.5
    if mode == "nearest":
        j = np.clip(np.rint(gx).astype(int), 0, dem.cols - 1)
        i = np.clip(np.rint(gy).astype(int), 0, dem.rows - 1)
        return dem.heights[i, j]
    if mode != "bilinear":
        raise ConfigError(f"unknown DEM sampling mode: {mode}")
    gx = np.clip(gx, 0.0, dem.cols - 1.0)
    gy = np.clip(gy, 0.0, dem.rows - 1.0)
    j0 = np.clip(np.floor(gx).astype(int), 0, max(dem.cols - 2, 0))
    i0 = np.clip(np.floor(gy).astype(int), 0, max(dem.rows - 2, 0))
    j1 = np.minimum(j0 + 1, dem.cols - 1)
    i1 = np.minimum(i0 + 1, dem.rows - 1)
    fx = gx - j0
    fy = gy - i0
    h = dem.heights
    return (
        h[i0, j0] * (1 - fx) * (1 - fy)
        + h[i0, j1] * fx * (1 - fy)
        + h[i1, j0] * (1 - fx) * fy
        + h[i1, j1] * fx * fy
    )


def dem_sample(dem: Dem, x: float, y: float, mode: str = "bilinear") -> float:
    """Terrain height at a single point (see dem_sample_array)."""
    return float(dem_sample_array(dem, np.array([x]), np.array([y]), mode)[0])


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def dem_to_dict(dem: Dem) -> dict:
    return {
        "origin_x": dem.origin_x,
        "origin_y": dem.origin_y,
        "cell_size": dem.cell_size,
        "rows": dem.rows,
        "cols": dem.cols,
        "heights": [float(v) for v in dem.heights.ravel()],
    }


def dem_from_dict(d: dict) -> Dem:
    rows, cols = int(d["rows"]), int(d["cols"])
    h = np.asarray(d["heights"], dtype=float)
    if h.size != rows * cols:
        raise ConfigError("rows*cols does not match heights length")
    return Dem(float(d["origin_x"]), float(d["origin_y"]), float(d["cell_size"]), h.reshape(rows, cols))


def load_dem(path) -> Dem:
    """Read a DEM from JSON or the equivalent ASCII-grid layout."""
    with open(path) as f:
        text = f.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return dem_from_dict(json.loads(stripped))
    header: dict[str, float] = {}
    data_lines = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) == 2 and parts[0].lower() in {"origin_x", "origin_y", "cell_size", "rows", "cols"}:
            header[parts[0].lower()] = float(parts[1])
        else:
            data_lines.append(line)
    for key in ("origin_x", "origin_y", "cell_size", "rows", "cols"):
        if key not in header:
            raise ConfigError(f"ASCII DEM missing header line: {key}")
    values = np.array([float(v) for line in data_lines for v in line.split()])
    return dem_from_dict(
        {
            "origin_x": header["origin_x"],
            "origin_y": header["origin_y"],
            "cell_size": header["cell_size"],
            "rows": int(header["rows"]),
            "cols": int(header["cols"]),
            "heights": values,
        }
    )


def save_dem(path, dem: Dem, extra: dict | None = None) -> None:
    d = dem_to_dict(dem)
    if extra:
        d.update(extra)
    with open(path, "w") as f:
        json.dump(d, f)


def polygon_to_dict(p: RegionPolygon) -> dict:
    return {
        "envelope": [[float(x), float(y)] for x, y in p.envelope],
        "holes": [[[float(x), float(y)] for x, y in h] for h in p.holes],
    }


def polygon_from_dict(d: dict) -> RegionPolygon:
    return RegionPolygon(np.asarray(d["envelope"], dtype=float), tuple(np.asarray(h, dtype=float) for h in d.get("holes", [])))


def trajectory_to_dict(t: Trajectory) -> dict:
    return {
        "speed": t.speed,
        "sampling_period": t.sampling_period,
        "waypoints": [[float(a) for a in w] for w in t.waypoints],
    }


def trajectory_from_dict(d: dict) -> Trajectory:
    return Trajectory(np.asarray(d["waypoints"], dtype=float), float(d["speed"]), float(d["sampling_period"]))


GRID_NO_DATA = -9999.0


def gridmap_to_dict(g: GridMap) -> dict:
    vals = np.where(g.no_data, GRID_NO_DATA, g.values)
    return {
        "origin_x": g.origin_x,
        "origin_y": g.origin_y,
        "cell_size": g.cell_size,
        "rows": g.rows,
        "cols": g.cols,
        "no_data_value": GRID_NO_DATA,
        "values": [float(v) for v in vals.ravel()],
    }


def gridmap_from_dict(d: dict) -> GridMap:
    rows, cols = int(d["rows"]), int(d["cols"])
    vals = np.asarray(d["values"], dtype=float).reshape(rows, cols)
    sentinel = float(d.get("no_data_value", GRID_NO_DATA))
    mask = vals == sentinel
    return GridMap(float(d["origin_x"]), float(d["origin_y"]), float(d["cell_size"]), np.where(mask, 0.0, vals), mask)


def _rle_encode_row(row: np.ndarray) -> list[int]:
    """Run lengths alternating free/occupied, starting with the free count."""
    runs = []
    current = False
    count = 0
    for v in row:
        if bool(v) == current:
            count += 1
        else:
            runs.append(count)
            current = bool(v)
            count = 1
    runs.append(count)
    return runs


def _rle_decode_row(runs: list[int], cols: int) -> np.ndarray:
    out = np.zeros(cols, dtype=bool)
    pos = 0
    occupied = False
    for count in runs:
        if occupied:
            out[pos : pos + count] = True
        pos += count
        occupied = not occupied
    return out


def binarygrid_to_dict(g: BinaryGrid) -> dict:
    return {
        "origin_x": g.origin_x,
        "origin_y": g.origin_y,
        "cell_size": g.cell_size,
        "rows": g.rows,
        "cols": g.cols,
        "rle_rows": [_rle_encode_row(g.occupied[i]) for i in range(g.rows)],
    }


def binarygrid_from_dict(d: dict) -> BinaryGrid:
    rows, cols = int(d["rows"]), int(d["cols"])
    occ = np.stack([_rle_decode_row(r, cols) for r in d["rle_rows"]]) if rows else np.zeros((0, cols), bool)
    return BinaryGrid(float(d["origin_x"]), float(d["origin_y"]), float(d["cell_size"]), occ)
