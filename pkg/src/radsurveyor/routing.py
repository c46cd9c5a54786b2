"""Grid routing between unloading points and region trajectories.

A* runs on the fused occupancy grid with 8-connectivity, unit/sqrt(2)
step costs, the octile-distance heuristic, and a no-corner-cutting rule
(a diagonal step needs both orthogonal neighbors free).  Route planning
exhaustively enumerates unload choice, region order, and per-region
direction, which is cheap at the handful-of-regions scale.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, UnreachableError
from .geo import BinaryGrid

SQRT2 = math.sqrt(2.0)


def inflate(grid: BinaryGrid, cells: int) -> BinaryGrid:
    """Dilate the occupied set by a Chebyshev radius of whole cells."""
    if cells < 0:
        raise ConfigError("inflation radius must be >= 0")
    if cells == 0 or not grid.occupied.any():
        return grid
    occ = ndimage.maximum_filter(grid.occupied, size=2 * cells + 1, mode="constant", cval=False)
    return BinaryGrid(grid.origin_x, grid.origin_y, grid.cell_size, occ)


def coarsen(grid: BinaryGrid, factor: int) -> BinaryGrid:
    """Block-reduce the grid; a coarse cell is occupied if any sub-cell is."""
    if factor < 1:
        raise ConfigError("coarsen factor must be >= 1")
    if factor == 1:
        return grid
    rows = grid.rows // factor
    cols = grid.cols // factor
    occ = grid.occupied[: rows * factor, : cols * factor]
    occ = occ.reshape(rows, factor, cols, factor).any(axis=(1, 3))
    return BinaryGrid(grid.origin_x, grid.origin_y, grid.cell_size * factor, occ)


def _octile(di: int, dj: int) -> float:
    di, dj = abs(di), abs(dj)
    return (di + dj) + (SQRT2 - 2.0) * min(di, dj)


_STEPS = [
    (-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
    (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2),
]


def astar(grid: BinaryGrid, start: tuple[int, int], goal: tuple[int, int]):
    """Shortest 8-connected path between free cells.

    Returns (path_cells, length_m); raises UnreachableError when no
    path exists.
    """
    rows, cols = grid.rows, grid.cols
    occ = grid.occupied
    for name, (i, j) in (("start", start), ("goal", goal)):
        if not (0 <= i < rows and 0 <= j < cols):
            raise ConfigError(f"{name} cell outside the grid")
        if occ[i, j]:
            raise ConfigError(f"{name} cell is occupied")
    if start == goal:
        return [start], 0.0
    g = np.full((rows, cols), np.inf)
    parent = np.full((rows, cols), -1, dtype=np.int64)
    si, sj = start
    gi, gj = goal
    g[si, sj] = 0.0
    heap = [(_octile(gi - si, gj - sj), si * cols + sj)]
    closed = np.zeros((rows, cols), dtype=bool)
    while heap:
        _, idx = heapq.heappop(heap)
        i, j = divmod(idx, cols)
        if closed[i, j]:
            continue
        closed[i, j] = True
        if (i, j) == (gi, gj):
            break
        base = g[i, j]
        for di, dj, cost in _STEPS:
            ni, nj = i + di, j + dj
            if not (0 <= ni < rows and 0 <= nj < cols) or occ[ni, nj]:
                continue
            if di and dj and (occ[i + di, j] or occ[i, j + dj]):
                continue  # no corner cutting
            nd = base + cost
            if nd < g[ni, nj] - 1e-12:
                g[ni, nj] = nd
                parent[ni, nj] = idx
                heapq.heappush(heap, (nd + _octile(gi - ni, gj - nj), ni * cols + nj))
    if not closed[gi, gj]:
        raise UnreachableError("goal not reachable on the grid")
    path = [(gi, gj)]
    idx = parent[gi, gj]
    while idx >= 0:
        path.append(divmod(int(idx), cols))
        idx = parent[path[-1][0], path[-1][1]]
    path.reverse()
    return path, float(g[gi, gj] * grid.cell_size)


def nearest_free(grid: BinaryGrid, cell: tuple[int, int], max_radius: int = 10) -> tuple[int, int]:
    """Closest free cell within a Chebyshev search radius."""
    i0, j0 = cell
    if 0 <= i0 < grid.rows and 0 <= j0 < grid.cols and not grid.occupied[i0, j0]:
        return cell
    best = None
    best_d = None
    for r in range(1, max_radius + 1):
        for i in range(max(0, i0 - r), min(grid.rows, i0 + r + 1)):
            for j in range(max(0, j0 - r), min(grid.cols, j0 + r + 1)):
                if grid.occupied[i, j]:
                    continue
                d = math.hypot(i - i0, j - j0)
                if best_d is None or d < best_d:
                    best, best_d = (i, j), d
        if best is not None:
            return best
    raise UnreachableError("no free cell near the requested point")


def path_to_polyline(grid: BinaryGrid, path: list[tuple[int, int]]) -> np.ndarray:
    return np.array([grid.cell_center(i, j) for i, j in path])


@dataclass(frozen=True)
class RoutePlan:
    legs: tuple  # metric polylines
    leg_lengths: tuple
    total_length: float
    chosen_unload: tuple[float, float]
    chosen_order: tuple  # region indices in visiting order
    chosen_directions: tuple  # True when a region's trajectory is reversed

    def to_dict(self) -> dict:
        return {
            "total_length": self.total_length,
            "chosen_unload": [float(v) for v in self.chosen_unload],
            "chosen_order": [int(v) for v in self.chosen_order],
            "chosen_directions": [bool(v) for v in self.chosen_directions],
            "legs": [
                {"length": float(l), "waypoints": [[float(x), float(y)] for x, y in leg]}
                for leg, l in zip(self.legs, self.leg_lengths)
            ],
        }


def plan_routes(
    grid: BinaryGrid,
    unload_candidates: list[tuple[float, float]],
    rois: list[tuple[tuple[float, float], tuple[float, float]]],
    allow_reverse: bool = True,
) -> RoutePlan:
    """Minimal-total-length route visiting every region once.

    Exhausts unload candidate x region permutation x per-region direction
    (entry/exit swap models running a coverage plan backwards); each leg
    is an A* path on the (already inflated) grid.
    """
    if not unload_candidates:
        raise ConfigError("need at least one unload candidate")
    if not rois:
        raise ConfigError("need at least one region to visit")
    cell_of = {}
    for name, pt in [("unload", u) for u in unload_candidates] + [
        ("roi", p) for pair in rois for p in pair
    ]:
        c = grid.index_of(*pt)
        if grid.occupied[c]:
            raise ConfigError(f"{name} point {pt} is occupied after inflation")
        cell_of[pt] = c

    cache: dict = {}

    def leg(a, b):
        key = (cell_of[a], cell_of[b])
        rkey = (key[1], key[0])
        if key not in cache:
            if rkey in cache:
                path, length = cache[rkey]
                cache[key] = (list(reversed(path)), length)
            else:
                try:
                    cache[key] = astar(grid, key[0], key[1])
                except UnreachableError as e:
                    raise UnreachableError(f"leg {a} -> {b}: {e}") from e
        return cache[key]

    n = len(rois)
    best = None
    directions_iter = list(itertools.product([False, True], repeat=n)) if allow_reverse else [(False,) * n]
    for unload in unload_candidates:
        for perm in itertools.permutations(range(n)):
            for dirs in directions_iter:
                endpoints = []
                for k in perm:
                    entry, exit_ = rois[k]
                    if dirs[k]:
                        entry, exit_ = exit_, entry
                    endpoints.append((entry, exit_))
                # legs: unload->entry1, exit_k->entry_{k+1}, exitN->unload
                conn = [(unload, endpoints[0][0])]
                for k in range(n - 1):
                    conn.append((endpoints[k][1], endpoints[k + 1][0]))
                conn.append((endpoints[-1][1], unload))
                total = 0.0
                legs = []
                lengths = []
                for a, b in conn:
                    path, length = leg(a, b)
                    legs.append(path_to_polyline(grid, path))
                    lengths.append(length)
                    total += length
                if best is None or total < best[0] - 1e-12:
                    best = (total, legs, lengths, unload, perm, dirs)
    total, legs, lengths, unload, perm, dirs = best
    return RoutePlan(
        legs=tuple(legs),
        leg_lengths=tuple(lengths),
        total_length=total,
        chosen_unload=tuple(unload),
        chosen_order=tuple(perm),
        chosen_directions=tuple(dirs),
    )
