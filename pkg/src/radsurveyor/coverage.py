"""Coverage planning inside mappable regions.

A region (envelope + holes) is decomposed into sweep-monotone cells by a
plane sweep perpendicular to the survey-line direction; cells are
ordered depth-first over their adjacency graph and covered by evenly
spaced parallel lines traversed in a zig-zag, with collision-free
connectors between consecutive cells found on a visibility graph over
the dilated holes.

Internally the sweep frame is (u, v): u advances across the region and v
runs along the survey lines, so every cell is { (u, v) :
u_lo <= u <= u_hi, lo(u) <= v <= hi(u) } with piecewise-linear chains.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GeometryError, UnreachableError
from .geo import RegionPolygon, Trajectory, ring_signed_area

_EPS = 1e-9


def _to_sweep(pts: np.ndarray, sweep_dir: float) -> np.ndarray:
    """Rotate xy points into the (v, u) sweep frame (v along survey lines)."""
    c, s = math.cos(sweep_dir), math.sin(sweep_dir)
    x, y = pts[:, 0], pts[:, 1]
    return np.stack([x * c + y * s, -x * s + y * c], axis=1)  # (v, u)


def _from_sweep(v, u, sweep_dir: float):
    c, s = math.cos(sweep_dir), math.sin(sweep_dir)
    return v * c - u * s, v * s + u * c


@dataclass
class Cell:
    """One sweep-monotone cell in the sweep frame plus its xy polygon."""

    index: int
    u_lo: float
    u_hi: float = 0.0
    # per-slab geometry: (ua, ub, v_lo(ua), v_lo(ub), v_hi(ua), v_hi(ub))
    slabs: list = field(default_factory=list)
    polygon: np.ndarray | None = None  # xy ring

    def v_range(self, u: float) -> tuple[float, float]:
        for ua, ub, la, lb, ha, hb in self.slabs:
            if ua - _EPS <= u <= ub + _EPS:
                t = 0.0 if ub == ua else (u - ua) / (ub - ua)
                return la + t * (lb - la), ha + t * (hb - ha)
        raise GeometryError("u outside cell range")

    @property
    def area(self) -> float:
        total = 0.0
        for ua, ub, la, lb, ha, hb in self.slabs:
            total += (ub - ua) * (((ha - la) + (hb - lb)) / 2.0)
        return total


@dataclass
class CellDecomposition:
    cells: list
    adjacency: dict
    sweep_dir: float


def _scanline_intervals(rings, u: float):
    """Sorted inside intervals [(v0, v1, e0, e1)] of the horizontal line at u.

    Edges are identified by (ring_idx, vertex_idx); an interval keeps the
    edges bounding it so it can be re-evaluated at nearby u values.
    """
    crossings = []
    for ri, ring in enumerate(rings):
        n = len(ring)
        for k in range(n):
            v0, u0 = ring[k]
            v1, u1 = ring[(k + 1) % n]
            if u0 == u1:
                continue
            lo, hi = (u0, u1) if u0 < u1 else (u1, u0)
            if lo <= u < hi:  # half-open rule avoids double counting at vertices
                t = (u - u0) / (u1 - u0)
                crossings.append((v0 + t * (v1 - v0), (ri, k)))
    crossings.sort(key=lambda c: c[0])
    if len(crossings) % 2 != 0:
        raise GeometryError("open contour during sweep (self-intersecting input?)")
    out = []
    for k in range(0, len(crossings), 2):
        (va, ea), (vb, eb) = crossings[k], crossings[k + 1]
        out.append((va, vb, ea, eb))
    return out


def _edge_v_at(rings, edge, u: float) -> float:
    ri, k = edge
    ring = rings[ri]
    v0, u0 = ring[k]
    v1, u1 = ring[(k + 1) % len(ring)]
    if u1 == u0:
        return (v0 + v1) / 2.0
    t = (u - u0) / (u1 - u0)
    return v0 + t * (v1 - v0)


def decompose_boustrophedon(region: RegionPolygon, sweep_dir: float) -> CellDecomposition:
    """Plane-sweep decomposition into cells monotone along the sweep.

    Cells appear, continue, split, and merge at the u coordinates of the
    region's vertices; adjacency links cells sharing an opening/closing
    boundary segment of positive length.
    """
    rings = [_to_sweep(region.envelope, sweep_dir)]
    rings += [_to_sweep(h, sweep_dir) for h in region.holes]
    all_u = np.concatenate([r[:, 1] for r in rings])
    events = np.unique(np.round(all_u / _EPS) * _EPS)
    if len(events) < 2:
        raise GeometryError("region degenerate along the sweep direction")

    cells: list[Cell] = []
    adjacency: dict[int, set[int]] = {}
    active: list[tuple[int, tuple]] = []  # (cell_index, interval)

    def new_cell(u_lo: float) -> int:
        idx = len(cells)
        cells.append(Cell(index=idx, u_lo=u_lo))
        adjacency[idx] = set()
        return idx

    for ei in range(len(events) - 1):
        ua, ub = float(events[ei]), float(events[ei + 1])
        um = (ua + ub) / 2.0
        intervals = _scanline_intervals(rings, um)
        # evaluate previous and current intervals at the shared boundary ua
        prev_at = [
            (ci, _edge_v_at(rings, iv[2], ua), _edge_v_at(rings, iv[3], ua))
            for ci, iv in active
        ]
        cur_at = [
            (iv, _edge_v_at(rings, iv[2], ua), _edge_v_at(rings, iv[3], ua))
            for iv in intervals
        ]
        matches: dict[int, list[int]] = {p: [] for p in range(len(prev_at))}
        rmatches: dict[int, list[int]] = {c: [] for c in range(len(cur_at))}
        for p, (_, plo, phi) in enumerate(prev_at):
            for cidx, (_, clo, chi) in enumerate(cur_at):
                if min(phi, chi) - max(plo, clo) > _EPS:
                    matches[p].append(cidx)
                    rmatches[cidx].append(p)
        next_active: list[tuple[int, tuple]] = []
        consumed = set()
        for cidx, iv in enumerate(intervals):
            ps = rmatches[cidx]
            if len(ps) == 1 and len(matches[ps[0]]) == 1:
                # clean continuation of one previous cell
                cell_idx = active[ps[0]][0]
            else:
                cell_idx = new_cell(ua)
                for p in ps:
                    old = active[p][0]
                    adjacency[old].add(cell_idx)
                    adjacency[cell_idx].add(old)
                    consumed.add(p)
            la = _edge_v_at(rings, iv[2], ua)
            ha = _edge_v_at(rings, iv[3], ua)
            lb = _edge_v_at(rings, iv[2], ub)
            hb = _edge_v_at(rings, iv[3], ub)
            cells[cell_idx].slabs.append((ua, ub, la, lb, ha, hb))
            cells[cell_idx].u_hi = ub
            next_active.append((cell_idx, iv))
        active = next_active

    # assemble xy polygons; both slab endpoints matter because a chain may
    # jump at a sweep-parallel boundary edge (the cell continues with a notch)
    for cell in cells:
        bottom = []
        top = []
        for ua, ub, la, lb, ha, hb in cell.slabs:
            bottom.append((la, ua))
            bottom.append((lb, ub))
            top.append((ha, ua))
            top.append((hb, ub))
        ring_vu = bottom + top[::-1]
        pts = []
        for v, u in ring_vu:
            x, y = _from_sweep(v, u, sweep_dir)
            if pts and abs(pts[-1][0] - x) < 1e-12 and abs(pts[-1][1] - y) < 1e-12:
                continue
            pts.append((x, y))
        if len(pts) >= 3 and abs(pts[0][0] - pts[-1][0]) < 1e-12 and abs(pts[0][1] - pts[-1][1]) < 1e-12:
            pts = pts[:-1]
        cell.polygon = np.asarray(pts)

    cells = [c for c in cells if c.area > _EPS]
    # re-index after dropping degenerate slivers
    remap = {c.index: i for i, c in enumerate(cells)}
    adj = {remap[c.index]: {remap[n] for n in adjacency[c.index] if n in remap} for c in cells}
    for i, c in enumerate(cells):
        c.index = i
    return CellDecomposition(cells=cells, adjacency=adj, sweep_dir=sweep_dir)


def auto_sweep_dir(region: RegionPolygon, candidates: int = 8) -> float:
    """Sweep direction minimizing the cell count over evenly spaced candidates."""
    best_dir, best_count = 0.0, None
    for k in range(candidates):
        d = k * math.pi / candidates
        try:
            count = len(decompose_boustrophedon(region, d).cells)
        except GeometryError:
            continue
        if best_count is None or count < best_count:
            best_dir, best_count = d, count
    if best_count is None:
        raise GeometryError("no sweep direction produced a valid decomposition")
    return best_dir


def order_cells(dec: CellDecomposition, start_cell: int = 0) -> list[int]:
    """Depth-first preorder over the adjacency graph, ascending tie-break."""
    n = len(dec.cells)
    if not (0 <= start_cell < n):
        raise ConfigError("start_cell out of range")
    seen = [False] * n
    order = []

    def visit(c):
        seen[c] = True
        order.append(c)
        for nb in sorted(dec.adjacency.get(c, ())):
            if not seen[nb]:
                visit(nb)

    visit(start_cell)
    # disconnected leftovers (possible after sliver dropping): visit by index
    for c in range(n):
        if not seen[c]:
            visit(c)
    return order


# ---------------------------------------------------------------------------
# Visibility paths
# ---------------------------------------------------------------------------


def offset_ring(ring: np.ndarray, clearance: float) -> np.ndarray:
    """Dilate a ring outward by vertex offsetting along the miter direction."""
    if clearance == 0:
        return np.asarray(ring, dtype=float)
    r = np.asarray(ring, dtype=float)
    if ring_signed_area(r) < 0:
        r = r[::-1]
    n = len(r)
    out = np.empty_like(r)
    for k in range(n):
        p_prev, p, p_next = r[(k - 1) % n], r[k], r[(k + 1) % n]
        e1 = p - p_prev
        e2 = p_next - p
        n1 = np.array([e1[1], -e1[0]])
        n2 = np.array([e2[1], -e2[0]])
        for nv in (n1, n2):
            norm = np.hypot(*nv)
            if norm > 0:
                nv /= norm
        m = n1 + n2
        mn = np.hypot(*m)
        if mn < 1e-12:
            m = n1
            mn = 1.0
        m = m / mn
        denom = max(float(np.dot(m, n1)), 0.2)  # cap the miter at 5x clearance
        out[k] = p + m * (clearance / denom)
    return out


def _as_pts(ring) -> list[tuple[float, float]]:
    if isinstance(ring, list):
        return ring
    return [(float(p[0]), float(p[1])) for p in ring]


def _proper_intersect(ax, ay, bx, by, px, py, qx, qy) -> bool:
    d1 = (qx - px) * (ay - py) - (qy - py) * (ax - px)
    d2 = (qx - px) * (by - py) - (qy - py) * (bx - px)
    if not ((d1 > _EPS and d2 < -_EPS) or (d1 < -_EPS and d2 > _EPS)):
        return False
    d3 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    d4 = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
    return (d3 > _EPS and d4 < -_EPS) or (d3 < -_EPS and d4 > _EPS)


def _point_in_ring_scalar(pts, x, y) -> bool:
    inside = False
    n = len(pts)
    for k in range(n):
        ax, ay = pts[k]
        bx, by = pts[(k + 1) % n]
        if (ay > y) != (by > y):
            if x < ax + (y - ay) * (bx - ax) / (by - ay):
                inside = not inside
    return inside


def _on_any_edge_scalar(pts, x, y, eps=1e-7) -> bool:
    n = len(pts)
    for k in range(n):
        ax, ay = pts[k]
        bx, by = pts[(k + 1) % n]
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        if seg2 == 0:
            continue
        t = ((x - ax) * dx + (y - ay) * dy) / seg2
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
        ex, ey = x - (ax + t * dx), y - (ay + t * dy)
        if ex * ex + ey * ey <= eps * eps:
            return True
    return False


def segment_blocked(a, b, obstacles) -> bool:
    """True if segment a-b crosses any obstacle ring's interior."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    for ring in obstacles:
        pts = _as_pts(ring)
        n = len(pts)
        for k in range(n):
            px, py = pts[k]
            qx, qy = pts[(k + 1) % n]
            if _proper_intersect(ax, ay, bx, by, px, py, qx, qy):
                return True
        for t in (0.25, 0.5, 0.75):
            mx = ax + t * (bx - ax)
            my = ay + t * (by - ay)
            # strictly interior: points on the boundary are allowed
            if _point_in_ring_scalar(pts, mx, my) and not _on_any_edge_scalar(pts, mx, my):
                return True
    return False


def visibility_path(a, b, obstacles: list[RegionPolygon | np.ndarray], clearance: float = 0.0) -> np.ndarray:
    """Shortest polyline from a to b avoiding the dilated obstacle interiors.

    Nodes are the endpoints plus the dilated obstacle vertices; edges are
    the mutually visible pairs; Dijkstra returns the shortest route.
    """
    dilated = []
    for obs in obstacles:
        ring = obs.envelope if isinstance(obs, RegionPolygon) else np.asarray(obs, dtype=float)
        dilated.append(offset_ring(ring, clearance))
    rings = [_as_pts(r) for r in dilated]
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not segment_blocked(a, b, rings):
        return np.stack([a, b])
    nodes = [a, b]
    for ring in dilated:
        nodes.extend(list(ring))
    n = len(nodes)
    dist = [math.inf] * n
    dist[0] = 0.0
    prev = [-1] * n
    heap = [(0.0, 0)]
    done = [False] * n
    while heap:
        d, i = heapq.heappop(heap)
        if done[i]:
            continue
        done[i] = True
        if i == 1:
            break
        for j in range(n):
            if done[j]:
                continue
            if segment_blocked(nodes[i], nodes[j], rings):
                continue
            nd = d + float(np.hypot(*(nodes[j] - nodes[i])))
            if nd < dist[j] - 1e-12:
                dist[j] = nd
                prev[j] = i
                heapq.heappush(heap, (nd, j))
    if not done[1] and math.isinf(dist[1]):
        raise UnreachableError("no collision-free connector exists")
    path = []
    k = 1
    while k != -1:
        path.append(nodes[k])
        k = prev[k]
    return np.asarray(path[::-1])


# ---------------------------------------------------------------------------
# Coverage trajectories
# ---------------------------------------------------------------------------


@dataclass
class CoveragePlan:
    cell_order: list
    waypoints: np.ndarray  # (N, 2)
    segment_kinds: list  # per segment: "survey" | "connector"
    line_spacing: float

    @property
    def survey_length(self) -> float:
        return self._length_of("survey")

    @property
    def connector_length(self) -> float:
        return self._length_of("connector")

    def _length_of(self, kind: str) -> float:
        total = 0.0
        for k, seg_kind in enumerate(self.segment_kinds):
            if seg_kind == kind:
                total += float(np.hypot(*(self.waypoints[k + 1] - self.waypoints[k])))
        return total

    @property
    def total_length(self) -> float:
        return self.survey_length + self.connector_length

    def trajectory(self, speed: float, sampling_period: float) -> Trajectory:
        wp3 = np.column_stack([self.waypoints, np.zeros(len(self.waypoints))])
        return Trajectory(wp3, speed, sampling_period)


def _line_hole_clip(u: float, lo: float, hi: float, dilated_vu: list[np.ndarray]):
    """Free sub-intervals of the line at u after removing dilated holes."""
    free = [(lo, hi)]
    for ring in dilated_vu:
        crossings = []
        n = len(ring)
        for k in range(n):
            v0, u0 = ring[k]
            v1, u1 = ring[(k + 1) % n]
            if u0 == u1:
                continue
            ulo, uhi = (u0, u1) if u0 < u1 else (u1, u0)
            if ulo <= u < uhi:
                t = (u - u0) / (u1 - u0)
                crossings.append(v0 + t * (v1 - v0))
        crossings.sort()
        for k in range(0, len(crossings) - 1, 2):
            fa, fb = crossings[k], crossings[k + 1]
            nxt = []
            for a, b in free:
                if fb <= a or fa >= b:
                    nxt.append((a, b))
                    continue
                if fa > a:
                    nxt.append((a, fa))
                if fb < b:
                    nxt.append((fb, b))
            free = nxt
    return [(a, b) for a, b in free if b - a > _EPS]


def _interval_reach(cell: Cell, a: float, b: float, has_left: bool, has_right: bool) -> float:
    """Worst distance from cell points with u in [a, b] to the bounding lines.

    A point projects onto a line for free when its v lies within the
    line's chain span; otherwise the lateral overhang adds up with the
    u-distance (skewed tips, chain jumps).
    """
    lo_a, hi_a = cell.v_range(a)
    lo_b, hi_b = cell.v_range(b)
    us = {a, b, (a + b) / 2.0, (3 * a + b) / 4.0, (a + 3 * b) / 4.0}
    for ua, ub, *_ in cell.slabs:
        if a < ua < b:
            us.add(ua)
        if a < ub < b:
            us.add(ub)
    worst = 0.0
    for u in us:
        lo_u, hi_u = cell.v_range(u)
        for v in (lo_u, hi_u):
            cand = []
            if has_left:
                lat = max(0.0, v - hi_a, lo_a - v)
                cand.append(math.hypot(u - a, lat))
            if has_right:
                lat = max(0.0, v - hi_b, lo_b - v)
                cand.append(math.hypot(b - u, lat))
            worst = max(worst, min(cand))
    return worst


def _refine_line_positions(cell: Cell, us: list[float], spacing: float) -> list[float]:
    """Bisect line intervals until every cell point is within spacing/2.

    Constant spacing covers gently bounded cells as-is; steeply slanted
    chains near tips need a few extra lines to stay within reach.
    """
    tol = spacing / 2.0 + 1e-9
    us = sorted(us)
    budget = 64
    changed = True
    while changed and budget > 0:
        changed = False
        intervals = [(cell.u_lo, us[0], False, True)]
        intervals += [(x, y, True, True) for x, y in zip(us, us[1:])]
        intervals.append((us[-1], cell.u_hi, True, False))
        for a, b, has_l, has_r in intervals:
            if b - a <= 1e-6 or budget <= 0:
                continue
            if _interval_reach(cell, a, b, has_l, has_r) > tol:
                us.append((a + b) / 2.0)
                budget -= 1
                changed = True
        us.sort()
    return us


def _cell_lines(cell: Cell, spacing: float, inset: float, dilated_vu: list[np.ndarray]):
    """Survey lines of one cell: list of (u, v_start, v_end), u then v order.

    A line interrupted by a dilated hole becomes several collinear
    sub-lines; the traversal reconnects them with routed connectors.
    """
    height = cell.u_hi - cell.u_lo
    offsets = []
    off = spacing / 2.0
    while off < height - _EPS:  # strictly inside: closing edges may be hole boundaries
        offsets.append(off)
        off += spacing
    if not offsets:
        offsets = [height / 2.0]
    elif height - offsets[-1] > spacing / 2.0 + _EPS:
        # close the residual gap at the top so coverage stays within s/2
        offsets.append(height - spacing / 2.0)
    us = _refine_line_positions(cell, [cell.u_lo + off for off in offsets], spacing)
    lines = []
    for u in us:
        lo, hi = cell.v_range(u)
        span = hi - lo
        if span <= _EPS:
            continue
        d = min(inset, span / 4.0)
        for a, b in _line_hole_clip(u, lo + d, hi - d, dilated_vu):
            lines.append((u, a, b))
    return lines


def coverage_trajectory(
    dec: CellDecomposition,
    order: list[int],
    line_spacing: float,
    entry=None,
    holes: list[np.ndarray] | None = None,
    clearance: float = 0.2,
    endpoint_inset: float = 0.25,
) -> CoveragePlan:
    """Zig-zag coverage of the ordered cells with collision-free connectors.

    Survey lines sit at half-spacing offsets from each cell's opening
    edge; each cell is entered at whichever corner of its line set lies
    nearest the previous exit.  Straight connectors are used when they
    clear the dilated holes, visibility-graph routes otherwise.
    """
    if line_spacing <= 0:
        raise ConfigError("line_spacing must be positive")
    holes = holes or []
    sweep = dec.sweep_dir
    dilated_rings = [offset_ring(h, clearance) for h in holes]
    dilated = [_as_pts(r) for r in dilated_rings]
    dilated_vu = [_to_sweep(r, sweep) for r in dilated_rings]
    waypoints: list[np.ndarray] = []
    kinds: list[str] = []
    prev_exit = np.asarray(entry, dtype=float) if entry is not None else None

    def emit(pt, kind):
        pt = np.asarray(pt, dtype=float)
        if waypoints and np.hypot(*(pt - waypoints[-1])) < 1e-12:
            return
        if waypoints:
            kinds.append(kind)
        waypoints.append(pt)

    for cell_idx in order:
        cell = dec.cells[cell_idx]
        lines = _cell_lines(cell, line_spacing, endpoint_inset, dilated_vu)
        if not lines:
            continue
        # choose traversal order and starting side nearest the previous exit
        candidates = []
        for reverse_u in (False, True):
            ordered = lines[::-1] if reverse_u else lines
            for start_high in (False, True):
                u, lo, hi = ordered[0]
                v0 = hi if start_high else lo
                x, y = _from_sweep(v0, u, sweep)
                candidates.append((reverse_u, start_high, np.array([x, y])))
        if prev_exit is None:
            reverse_u, start_high, first_pt = candidates[0]
        else:
            reverse_u, start_high, first_pt = min(
                candidates, key=lambda c: float(np.hypot(*(c[2] - prev_exit)))
            )
        ordered = lines[::-1] if reverse_u else lines
        # connector into the cell
        if prev_exit is not None:
            if not segment_blocked(prev_exit, first_pt, dilated):
                path = np.stack([prev_exit, first_pt])
            else:
                path = visibility_path(prev_exit, first_pt, holes, clearance)
            for pt in path:
                emit(pt, "connector")
        high = start_high
        for u, lo, hi in ordered:
            v_start, v_end = (hi, lo) if high else (lo, hi)
            start_pt = _xy(v_start, u, sweep)
            if waypoints and np.hypot(*(start_pt - waypoints[-1])) > 1e-12:
                # hops between lines must clear the dilated holes too
                if segment_blocked(waypoints[-1], start_pt, dilated):
                    for pt in visibility_path(waypoints[-1], start_pt, holes, clearance)[1:-1]:
                        emit(pt, "connector")
            emit(start_pt, "connector")
            emit(_xy(v_end, u, sweep), "survey")
            high = not high
        prev_exit = waypoints[-1]
    if len(waypoints) < 2:
        raise GeometryError("coverage produced no trajectory")
    return CoveragePlan(
        cell_order=list(order),
        waypoints=np.asarray(waypoints),
        segment_kinds=kinds,
        line_spacing=line_spacing,
    )


def _xy(v, u, sweep):
    x, y = _from_sweep(v, u, sweep)
    return np.array([x, y])


def plan_to_dict(plan: CoveragePlan, dec: CellDecomposition) -> dict:
    return {
        "line_spacing": plan.line_spacing,
        "sweep_dir": dec.sweep_dir,
        "cell_order": [int(c) for c in plan.cell_order],
        "cells": [[[float(x), float(y)] for x, y in c.polygon] for c in dec.cells],
        "waypoints": [[float(x), float(y)] for x, y in plan.waypoints],
        "segment_kinds": list(plan.segment_kinds),
    }
