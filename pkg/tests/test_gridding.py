"""Tests for gridding, adaptive thresholds, contouring, and simplification."""

import math

import numpy as np
import pytest

from radsurveyor import gridding
from radsurveyor.errors import ConfigError, DataError, GeometryError
from radsurveyor.fieldsim import Measurement
from radsurveyor.geo import GridMap, points_in_ring, ring_signed_area


def meas(x, y, counts, w_cs=None, w_co=None, t=0.0):
    return Measurement(t=t, x=x, y=y, z_agl=1.0, counts=counts, dose_rate=counts * 7e-4, w_cs=w_cs, w_co=w_co)


# ---------------------------------------------------------------------------
# downsample_by_summing
# ---------------------------------------------------------------------------


def test_downsample_identity():
    ms = [meas(float(k), 0.0, 5.0) for k in range(5)]
    assert gridding.downsample_by_summing(ms, 1) == ms


def test_downsample_equal_measurements():
    ms = [meas(1.0, 2.0, 5.0) for _ in range(4)]
    out = gridding.downsample_by_summing(ms, 4)
    assert len(out) == 1
    assert out[0].counts == 20.0
    assert out[0].x == 1.0 and out[0].y == 2.0


def test_downsample_centroids_oracle():
    # 10 inputs, n=4 -> 2 outputs and 2 dropped; positions are group means
    ms = [meas(float(k), float(2 * k), float(k + 1)) for k in range(10)]
    out = gridding.downsample_by_summing(ms, 4)
    assert len(out) == 2
    # direct arithmetic oracle
    assert out[0].x == pytest.approx(np.mean([0, 1, 2, 3]))
    assert out[0].y == pytest.approx(np.mean([0, 2, 4, 6]))
    assert out[0].counts == pytest.approx(sum([1, 2, 3, 4]))
    assert out[1].x == pytest.approx(np.mean([4, 5, 6, 7]))
    assert out[1].counts == pytest.approx(sum([5, 6, 7, 8]))


def test_downsample_windows_summed():
    ms = [meas(0.0, 0.0, 4.0, w_cs=1.0, w_co=2.0) for _ in range(4)]
    out = gridding.downsample_by_summing(ms, 4)
    assert out[0].w_cs == 4.0 and out[0].w_co == 8.0


def test_downsample_empty():
    assert gridding.downsample_by_summing([], 4) == []


# ---------------------------------------------------------------------------
# interpolate_grid
# ---------------------------------------------------------------------------


def lattice_measurements(fn, n=8, spacing=1.0):
    out = []
    for i in range(n):
        for j in range(n):
            x, y = j * spacing, i * spacing
            out.append(meas(x, y, fn(x, y)))
    return out


def test_interpolate_constant_field():
    ms = lattice_measurements(lambda x, y: 42.0)
    g = gridding.interpolate_grid(ms, 0.5)
    assert np.all(g.values[~g.no_data] == pytest.approx(42.0))
    assert np.any(~g.no_data)


def test_interpolate_affine_exact():
    ms = lattice_measurements(lambda x, y: 2 * x + 3 * y + 1)
    g = gridding.interpolate_grid(ms, 0.5)
    gx, gy = g.cell_centers()
    want = 2 * gx + 3 * gy + 1
    ok = ~g.no_data
    assert np.max(np.abs(g.values[ok] - want[ok])) < 1e-9


def test_interpolate_value_at_sample_node():
    rng = np.random.default_rng(0)
    ms = lattice_measurements(lambda x, y: float(rng.uniform(0, 100)), n=6, spacing=1.0)
    g = gridding.interpolate_grid(ms, 1.0)
    # grid origin is min - cell/2, so cell centers coincide with samples
    for m in ms:
        j = int(round((m.x - g.origin_x) / g.cell_size - 0.5))
        i = int(round((m.y - g.origin_y) / g.cell_size - 0.5))
        assert g.values[i, j] == pytest.approx(m.counts, abs=1e-9)


def test_interpolate_rejects_degenerate():
    with pytest.raises(GeometryError):
        gridding.interpolate_grid([meas(0, 0, 1), meas(1, 0, 1)], 0.5)
    with pytest.raises(GeometryError):
        gridding.interpolate_grid([meas(float(k), 0.0, 1.0) for k in range(5)], 0.5)


# ---------------------------------------------------------------------------
# adaptive_thresholds
# ---------------------------------------------------------------------------


def test_thresholds_hand_case():
    thr = gridding.adaptive_thresholds([0, 0, 0, 0, 10])
    assert thr.mu == pytest.approx(2.0)
    assert thr.sigma == pytest.approx(4.0)
    assert thr.t_bg == pytest.approx(4.0)
    assert thr.mu_bg == pytest.approx(0.0)
    assert thr.sigma_bg == pytest.approx(0.0)
    assert thr.t_hot == pytest.approx(0.0)


def test_thresholds_constant_dataset():
    thr = gridding.adaptive_thresholds([7.0, 7.0, 7.0])
    assert thr.t_bg == 7.0 and thr.t_hot == 7.0 and thr.sigma == 0.0


def test_thresholds_identities_and_recompute_oracle():
    rng = np.random.default_rng(1)
    v = np.concatenate([rng.normal(100, 10, 100_000), np.full(100, 1e4)])
    thr = gridding.adaptive_thresholds(v)
    # independent recomputation with numpy population statistics
    mu, sigma = v.mean(), v.std()
    t_bg = mu + sigma / 2
    bg = v[v <= t_bg]
    assert thr.t_bg == pytest.approx(t_bg, rel=1e-12)
    assert thr.t_hot == pytest.approx(bg.mean() + 3 * bg.std(), rel=1e-12)
    assert thr.t_bg == pytest.approx(t_bg, rel=0.01)


@pytest.mark.parametrize("seed", range(5))
def test_thresholds_shift_scale_equivariance(seed):
    rng = np.random.default_rng(seed)
    v = rng.exponential(50, 500) + rng.normal(100, 5, 500)
    base = gridding.adaptive_thresholds(v)
    for c in (-17.0, 3.5):
        shifted = gridding.adaptive_thresholds(v + c)
        assert shifted.t_bg == pytest.approx(base.t_bg + c, abs=1e-9)
        assert shifted.t_hot == pytest.approx(base.t_hot + c, abs=1e-9)
    for k in (0.25, 8.0):
        scaled = gridding.adaptive_thresholds(v * k)
        assert scaled.t_bg == pytest.approx(base.t_bg * k, rel=1e-12)
        assert scaled.t_hot == pytest.approx(base.t_hot * k, rel=1e-12)


def test_thresholds_too_few_values():
    with pytest.raises(DataError):
        gridding.adaptive_thresholds([1.0])


# ---------------------------------------------------------------------------
# marching squares
# ---------------------------------------------------------------------------


def gaussian_grid(centers, amps, sigma=2.0, size=40, cell=0.5):
    xs = (np.arange(int(size / cell)) + 0.5) * cell
    gx, gy = np.meshgrid(xs, xs)
    v = np.zeros_like(gx)
    for (cx, cy), a in zip(centers, amps):
        v += a * np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2 * sigma**2))
    return GridMap(0.0, 0.0, cell, v, np.zeros_like(v, dtype=bool))


def test_marching_below_level_empty():
    g = gaussian_grid([(20, 20)], [5.0])
    assert gridding.grid_contours(g, 100.0) == []


def test_marching_single_blob():
    g = gaussian_grid([(20, 20)], [100.0])
    rings = gridding.grid_contours(g, 50.0)
    assert len(rings) == 1
    ring = rings[0]
    assert ring_signed_area(ring) > 0  # CCW around the above-region
    assert bool(points_in_ring(ring, np.array([20.0]), np.array([20.0]))[0])
    # iso-radius of the gaussian at level 50: r = sigma*sqrt(2 ln 2)
    r = 2.0 * math.sqrt(2 * math.log(2))
    dists = np.hypot(ring[:, 0] - 20, ring[:, 1] - 20)
    assert np.allclose(dists, r, atol=0.2)


def test_marching_two_blobs():
    g = gaussian_grid([(10, 10), (30, 30)], [100.0, 80.0])
    rings = gridding.grid_contours(g, 40.0)
    assert len(rings) == 2


def test_marching_linear_field_crossing_position():
    # values = x, so the level-7.3 contour is the vertical line x = 7.3
    xs = (np.arange(20) + 0.5) * 1.0
    gx, gy = np.meshgrid(xs, xs)
    g = GridMap(0.0, 0.0, 1.0, gx.copy(), np.zeros_like(gx, dtype=bool))
    rings = gridding.grid_contours(g, 7.3)
    assert len(rings) == 1
    ring = rings[0]
    left = ring[np.abs(ring[:, 0] - 7.3) < 1e-9]
    assert len(left) > 0  # crossing points interpolated to x = 7.3 exactly


def test_marching_respects_no_data():
    v = np.full((10, 10), 100.0)
    mask = np.zeros((10, 10), dtype=bool)
    mask[:, 5:] = True
    g = GridMap(0.0, 0.0, 1.0, v, mask)
    rings = gridding.grid_contours(g, 50.0)
    assert len(rings) == 1
    assert rings[0][:, 0].max() < 5.5  # contour stays within the valid half


# ---------------------------------------------------------------------------
# simplify_polygon
# ---------------------------------------------------------------------------


def simplify_oracle(ring, max_vertices):
    """Independent exhaustive removal simulation."""
    pts = [tuple(p) for p in ring]
    while len(pts) > max_vertices:
        best, best_imp = None, None
        for k in range(len(pts)):
            p0 = np.array(pts[k - 1])
            p1 = np.array(pts[k])
            p2 = np.array(pts[(k + 1) % len(pts)])
            a, b = p1 - p0, p2 - p1
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            imp = 0.0 if na == 0 or nb == 0 else abs(math.acos(np.clip(np.dot(a, b) / (na * nb), -1, 1))) * na * nb
            if best_imp is None or imp < best_imp:
                best, best_imp = k, imp
        pts.pop(best)
    return np.asarray(pts)


def test_simplify_triangle_unchanged():
    tri = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 3.0]])
    out = gridding.simplify_polygon(tri, 3)
    np.testing.assert_allclose(out, tri)


def test_simplify_square_with_midpoints():
    ring = np.array(
        [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0], [0.0, 2.0], [0.0, 1.0]]
    )
    out = gridding.simplify_polygon(ring, 4)
    corners = {(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)}
    assert {tuple(p) for p in out} == corners
    np.testing.assert_allclose(out, simplify_oracle(ring, 4))


def test_simplify_noop_when_under_limit():
    ring = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 3.0]])
    np.testing.assert_allclose(gridding.simplify_polygon(ring, 10), ring)


def test_simplify_matches_oracle_random():
    rng = np.random.default_rng(3)
    for _ in range(10):
        ang = np.sort(rng.uniform(0, 2 * math.pi, 12))
        rad = rng.uniform(1, 5, 12)
        ring = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        out = gridding.simplify_polygon(ring, 5)
        np.testing.assert_allclose(out, simplify_oracle(ring, 5))


def test_simplify_idempotent_and_subset():
    rng = np.random.default_rng(4)
    ang = np.sort(rng.uniform(0, 2 * math.pi, 15))
    ring = np.stack([3 * np.cos(ang), 3 * np.sin(ang)], axis=1)
    once = gridding.simplify_polygon(ring, 6)
    twice = gridding.simplify_polygon(once, 6)
    np.testing.assert_allclose(once, twice)
    in_set = {tuple(p) for p in ring}
    assert all(tuple(p) in in_set for p in once)


def test_simplify_config_error():
    with pytest.raises(ConfigError):
        gridding.simplify_polygon(np.zeros((5, 2)), 2)


# ---------------------------------------------------------------------------
# extract_hotspots
# ---------------------------------------------------------------------------


def blob_fixture(centers, amps, background=10.0, sigma=2.0, size=40.0, spacing=1.0):
    """Measurements on a lattice sampling gaussian blobs over background."""
    ms = []
    n = int(size / spacing)
    for i in range(n):
        for j in range(n):
            x, y = j * spacing, i * spacing
            v = background
            for (cx, cy), a in zip(centers, amps):
                v += a * math.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma**2))
            ms.append(meas(x, y, v))
    return ms


def test_hotspots_empty_when_quiet():
    ms = blob_fixture([], [])
    thr = gridding.adaptive_thresholds([m.counts for m in ms])
    grid = gridding.interpolate_grid(ms, 0.5)
    assert gridding.extract_hotspots(grid, thr, ms) == []


def test_hotspot_single_blob_contains_peak():
    ms = blob_fixture([(20.0, 20.0)], [500.0])
    thr = gridding.adaptive_thresholds([m.counts for m in ms])
    grid = gridding.interpolate_grid(ms, 0.5)
    hs = gridding.extract_hotspots(grid, thr, ms, min_samples=4)
    assert len(hs) == 1
    h = hs[0]
    assert bool(points_in_ring(h.contour, np.array([20.0]), np.array([20.0]))[0])
    assert h.enclosed_samples >= 4
    assert len(h.polygon.envelope) <= 7
    assert h.peak_value == pytest.approx(grid.values.max())


def test_hotspot_two_blobs_separate():
    ms = blob_fixture([(10.0, 10.0), (30.0, 30.0)], [500.0, 400.0])
    thr = gridding.adaptive_thresholds([m.counts for m in ms])
    grid = gridding.interpolate_grid(ms, 0.5)
    hs = gridding.extract_hotspots(grid, thr, ms, min_samples=4, erode_r=1.0, dilate_r=1.0)
    assert len(hs) == 2


def test_hotspot_blobs_merge_when_close():
    # footprints overlap after thresholding: a single merged hotspot
    ms = blob_fixture([(18.0, 20.0), (22.0, 20.0)], [500.0, 500.0], sigma=3.0)
    thr = gridding.adaptive_thresholds([m.counts for m in ms])
    grid = gridding.interpolate_grid(ms, 0.5)
    hs = gridding.extract_hotspots(grid, thr, ms, min_samples=4)
    assert len(hs) == 1


def test_hotspot_min_samples_filter():
    ms = blob_fixture([(20.0, 20.0)], [500.0], sigma=0.8)
    thr = gridding.adaptive_thresholds([m.counts for m in ms])
    grid = gridding.interpolate_grid(ms, 0.5)
    # a tight blob encloses few lattice samples; a high cut removes it
    loose = gridding.extract_hotspots(grid, thr, ms, min_samples=1)
    strict = gridding.extract_hotspots(grid, thr, ms, min_samples=50)
    assert len(loose) >= 1
    assert strict == []


def test_opening_is_antiextensive():
    # erosion followed by equal dilation never reaches beyond the
    # pre-morphology above-threshold footprint
    ms = blob_fixture([(20.0, 20.0)], [500.0], sigma=3.0)
    thr = gridding.adaptive_thresholds([m.counts for m in ms])
    grid = gridding.interpolate_grid(ms, 0.5)
    opened = gridding.extract_hotspots(grid, thr, ms, erode_r=1.5, dilate_r=1.5)
    assert len(opened) == 1
    gx, gy = grid.cell_centers()
    above = (~grid.no_data) & (grid.values >= thr.t_hot)
    ax, ay = gx[above], gy[above]
    # every opened-contour vertex within half a cell diagonal of an above cell
    for x, y in opened[0].contour:
        assert np.min(np.hypot(ax - x, ay - y)) <= grid.cell_size * 0.7072


def test_hot_measurements_lie_inside_contours():
    # every raw measurement above t_hot (inside the hull) falls inside
    # some pre-morphology connected set's contour
    ms = blob_fixture([(12.0, 12.0), (28.0, 28.0)], [600.0, 450.0])
    thr = gridding.adaptive_thresholds([m.counts for m in ms])
    grid = gridding.interpolate_grid(ms, 0.5)
    rings = gridding.grid_contours(grid, thr.t_hot)
    rings = [r for r in rings if ring_signed_area(r) > 0]
    hot = [m for m in ms if m.counts > thr.t_hot]
    assert hot
    for m in hot:
        inside = any(
            bool(points_in_ring(r, np.array([m.x]), np.array([m.y]))[0]) for r in rings
        )
        assert inside, f"hot measurement at ({m.x}, {m.y}) outside all contours"


def test_hotspot_contours_disjoint():
    ms = blob_fixture([(10.0, 10.0), (30.0, 30.0)], [500.0, 400.0])
    thr = gridding.adaptive_thresholds([m.counts for m in ms])
    grid = gridding.interpolate_grid(ms, 0.5)
    hs = gridding.extract_hotspots(grid, thr, ms)
    assert len(hs) == 2
    a, b = hs[0].contour, hs[1].contour
    assert not np.any(points_in_ring(a, b[:, 0], b[:, 1]))
    assert not np.any(points_in_ring(b, a[:, 0], a[:, 1]))
