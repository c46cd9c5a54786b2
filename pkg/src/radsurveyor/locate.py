"""Multi-source localization from gridded radiation measurements.

Three steps: count the sources by adaptive thresholding + contouring of
the measurement grid, initialize each source at its contour's centroid
with an intensity inverted from the peak value, then refine the stacked
(alpha, x, y) parameters by Gauss-Newton iterations against the
inverse-square residuals

    r_m = c_m - sum_r alpha_r / ((x_m - x_r)^2 + (y_m - y_r)^2 + h^2).

The module also separates the two-isotope energy windows by subtracting
the stripping leak of the high-energy isotope from the low-energy window.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EstimationError,
    GeometryError,
    NumericError,
    RankDeficiencyError,
)
from .fieldsim import Measurement, RadSource
from .geo import GridMap, points_in_ring, ring_centroid
from .gridding import ThresholdResult, adaptive_thresholds, grid_contours


# ---------------------------------------------------------------------------
# Source counting and initialization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PeakCount:
    r: int
    contours: tuple
    thresholds: ThresholdResult


def count_peaks(grid: GridMap, raw: list[Measurement], min_samples: int = 4) -> PeakCount:
    """Number of sources = valid contours at the hotspot threshold.

    Thresholds come from the raw measurement values; a contour is valid
    when it encloses at least min_samples raw measurements.
    """
    thr = adaptive_thresholds([m.counts for m in raw])
    valid = []
    if np.any((~grid.no_data) & (grid.values > thr.t_hot)):
        rx = np.array([m.x for m in raw])
        ry = np.array([m.y for m in raw])
        for ring in grid_contours(grid, thr.t_hot):
            from .geo import ring_signed_area

            if ring_signed_area(ring) <= 0:
                continue
            if int(np.count_nonzero(points_in_ring(ring, rx, ry))) >= min_samples:
                valid.append(ring)
    return PeakCount(r=len(valid), contours=tuple(valid), thresholds=thr)


def init_parameters(contours, grid: GridMap, h: float, mu_bg: float = 0.0) -> np.ndarray:
    """Initial (alpha, x, y) per contour: centroid position, peak-inverted
    intensity alpha = (peak - mu_bg) * h^2."""
    if len(contours) == 0:
        raise GeometryError("no contours to initialize from")
    gx, gy = grid.cell_centers()
    theta = np.zeros((len(contours), 3))
    for k, ring in enumerate(contours):
        cx, cy = ring_centroid(ring)
        xmin, ymin = np.min(ring, axis=0)
        xmax, ymax = np.max(ring, axis=0)
        box = (gx >= xmin) & (gx <= xmax) & (gy >= ymin) & (gy <= ymax) & ~grid.no_data
        if np.any(box):
            inside = points_in_ring(ring, gx[box], gy[box])
            peak = float(grid.values[box][inside].max()) if np.any(inside) else float(grid.values[box].max())
        else:
            peak = mu_bg
        theta[k] = (max(peak - mu_bg, 1e-9) * h * h, cx, cy)
    return theta


# ---------------------------------------------------------------------------
# Gauss-Newton refinement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussNewtonReport:
    theta: np.ndarray
    iterations: int
    residual_history: tuple
    converged: bool
    jacobian_dims: tuple
    background: float = 0.0


def _model(theta: np.ndarray, xm: np.ndarray, ym: np.ndarray, h: float) -> np.ndarray:
    pred = np.zeros_like(xm)
    for alpha, xr, yr in theta:
        pred += alpha / ((xm - xr) ** 2 + (ym - yr) ** 2 + h * h)
    return pred


def residuals_and_jacobian(theta: np.ndarray, xm, ym, cm, h: float, fit_background=False, background=0.0):
    """Residual vector and its analytic Jacobian (M x 3R [+1])."""
    m = len(xm)
    r_count = len(theta)
    cols = 3 * r_count + (1 if fit_background else 0)
    jac = np.zeros((m, cols))
    pred = np.full(m, background, dtype=float)
    for r, (alpha, xr, yr) in enumerate(theta):
        dx = xm - xr
        dy = ym - yr
        denom = dx * dx + dy * dy + h * h
        pred += alpha / denom
        jac[:, 3 * r] = -1.0 / denom
        jac[:, 3 * r + 1] = -alpha * 2.0 * dx / denom**2
        jac[:, 3 * r + 2] = -alpha * 2.0 * dy / denom**2
    if fit_background:
        jac[:, -1] = -1.0
    res = cm - pred
    return res, jac


def gauss_newton(
    theta0: np.ndarray,
    ms: list[Measurement],
    h: float,
    tol: float = 1e-8,
    max_iter: int = 100,
    mu_bg: float = 0.0,
    fit_background: bool = False,
    per_measurement_h: bool = False,
) -> GaussNewtonReport:
    """Iterate theta <- theta - (J^T J)^-1 J^T r with step-halving damping.

    The background level mu_bg is subtracted from the measured counts
    before fitting (optionally fitted as one extra parameter instead);
    iterations stop when the summed squared residuals stop decreasing by
    more than a tol fraction.  With per_measurement_h each measurement's
    own detector height replaces the shared scalar h.
    """
    theta = np.array(theta0, dtype=float).reshape(-1, 3)
    r_count = len(theta)
    if len(ms) < 3 * r_count:
        raise ConfigError("need at least 3 measurements per source")
    if h <= 0:
        raise ConfigError("detector height must be positive")
    if per_measurement_h:
        h = np.array([m.z_agl for m in ms])
    xm = np.array([m.x for m in ms])
    ym = np.array([m.y for m in ms])
    cm = np.array([m.counts for m in ms]) - (0.0 if fit_background else mu_bg)
    background = mu_bg if fit_background else 0.0

    def unpack(vec):
        if fit_background:
            return vec[:-1].reshape(-1, 3), float(vec[-1])
        return vec.reshape(-1, 3), background

    vec = np.concatenate([theta.ravel(), [background]]) if fit_background else theta.ravel()
    t_cur, b_cur = unpack(vec)
    res, jac = residuals_and_jacobian(t_cur, xm, ym, cm, h, fit_background, b_cur)
    s = float(res @ res)
    if not np.isfinite(s):
        raise NumericError("non-finite residual at the initial point")
    history = [s]
    iterations = 0
    converged = False
    for it in range(max_iter):
        try:
            step = np.linalg.solve(jac.T @ jac, jac.T @ res)
        except np.linalg.LinAlgError as e:
            raise RankDeficiencyError(f"singular normal equations: {e}", iteration=it) from e
        if not np.all(np.isfinite(step)):
            raise NumericError("non-finite Gauss-Newton step")
        if float(np.abs(step).max()) == 0.0:
            converged = True
            break
        scale = 1.0
        accepted = False
        for _ in range(10):  # step halving keeps accepted residuals non-increasing
            cand = vec - scale * step
            c_theta, c_bg = unpack(cand)
            c_res, c_jac = residuals_and_jacobian(c_theta, xm, ym, cm, h, fit_background, c_bg)
            c_s = float(c_res @ c_res)
            if np.isfinite(c_s) and c_s <= s:
                accepted = True
                break
            scale /= 2.0
        if not accepted:
            break  # residuals stopped decreasing: damped steps exhausted
        vec, res, jac = cand, c_res, c_jac
        rel_drop = (s - c_s) / max(s, 1e-300)
        s = c_s
        history.append(s)
        iterations += 1
        if rel_drop < tol:
            converged = True
            break
    else:
        converged = False
    theta, background = unpack(vec)
    return GaussNewtonReport(
        theta=theta,
        iterations=iterations,
        residual_history=tuple(history),
        converged=converged,
        jacobian_dims=(len(ms), 3 * r_count + (1 if fit_background else 0)),
        background=background,
    )


# ---------------------------------------------------------------------------
# Scoring against ground truth
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalizationScore:
    matches: tuple  # (estimate_idx, truth_idx, distance)
    misses: tuple  # truth indices with no estimate
    false_alarms: tuple  # estimate indices with no truth

    @property
    def mean_error(self) -> float:
        if not self.matches:
            return math.nan
        return float(np.mean([d for _, _, d in self.matches]))


def score(theta: np.ndarray, truth: list[RadSource], max_match: float = 3.0) -> LocalizationScore:
    """Optimal one-to-one estimate/truth assignment within max_match meters.

    Exhaustive over the smaller side for up to 6 sources, greedy beyond;
    maximizes the match count, then minimizes the total distance.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1, 3)
    est = theta[:, 1:3]
    tru = np.array([[s.x, s.y] for s in truth]) if truth else np.zeros((0, 2))
    ne, nt = len(est), len(tru)
    if ne == 0 or nt == 0:
        return LocalizationScore((), tuple(range(nt)), tuple(range(ne)))
    dists = np.hypot(est[:, None, 0] - tru[None, :, 0], est[:, None, 1] - tru[None, :, 1])
    small = min(ne, nt)
    best = None
    if small <= 6:
        if ne <= nt:
            for assign in itertools.permutations(range(nt), ne):
                pairs = [(e, t) for e, t in enumerate(assign) if dists[e, t] <= max_match]
                key = (-len(pairs), sum(dists[e, t] for e, t in pairs))
                if best is None or key < best[0]:
                    best = (key, pairs)
        else:
            for assign in itertools.permutations(range(ne), nt):
                pairs = [(e, t) for t, e in enumerate(assign) if dists[e, t] <= max_match]
                key = (-len(pairs), sum(dists[e, t] for e, t in pairs))
                if best is None or key < best[0]:
                    best = (key, pairs)
        pairs = best[1]
    else:  # greedy nearest-pair sweep
        pairs = []
        used_e, used_t = set(), set()
        order = sorted(((dists[e, t], e, t) for e in range(ne) for t in range(nt)))
        for d, e, t in order:
            if d > max_match:
                break
            if e in used_e or t in used_t:
                continue
            pairs.append((e, t))
            used_e.add(e)
            used_t.add(t)
    matches = tuple((e, t, float(dists[e, t])) for e, t in sorted(pairs, key=lambda p: p[1]))
    matched_e = {e for e, _, _ in matches}
    matched_t = {t for _, t, _ in matches}
    return LocalizationScore(
        matches=matches,
        misses=tuple(t for t in range(nt) if t not in matched_t),
        false_alarms=tuple(e for e in range(ne) if e not in matched_e),
    )


# ---------------------------------------------------------------------------
# Two-window isotope separation
# ---------------------------------------------------------------------------


def estimate_stripping(co_only: list[Measurement], window_bg: tuple[float, float]) -> float:
    """Stripping coefficient from a scene containing only the high-energy
    isotope: least-squares slope through the origin of the low-energy net
    counts against the high-energy net counts.

    window_bg is (cs_background, co_background) in counts per integration.
    """
    if any(m.w_cs is None or m.w_co is None for m in co_only):
        raise DataError("measurements lack window counts")
    if not co_only:
        raise DataError("no measurements")
    b_cs, b_co = window_bg
    cs_net = np.array([m.w_cs for m in co_only]) - b_cs
    co_net = np.array([m.w_co for m in co_only]) - b_co
    denom = float(co_net @ co_net)
    if denom == 0.0 or float(co_net.max()) <= 3.0 * math.sqrt(max(b_co, 1.0)):
        raise EstimationError("no usable high-energy dynamic range in the data")
    return float((cs_net @ co_net) / denom)


def separate_isotopes(
    ms: list[Measurement], k: float, window_bg: tuple[float, float]
) -> tuple[list[Measurement], list[Measurement]]:
    """Net per-isotope measurement lists (cs_net, co_net), clamped at zero.

    co_net = W_co - b_co; cs_net = W_cs - b_cs - k * co_net.  The outputs
    plug straight into interpolate_grid to build per-isotope maps.
    """
    if any(m.w_cs is None or m.w_co is None for m in ms):
        raise DataError("measurements lack window counts")
    b_cs, b_co = window_bg
    cs_list, co_list = [], []
    for m in ms:
        co_net = max(m.w_co - b_co, 0.0)
        cs_net = max(m.w_cs - b_cs - k * (m.w_co - b_co), 0.0)
        cs_list.append(Measurement(m.t, m.x, m.y, m.z_agl, cs_net, 0.0))
        co_list.append(Measurement(m.t, m.x, m.y, m.z_agl, co_net, 0.0))
    return cs_list, co_list


# ---------------------------------------------------------------------------
# Estimate file I/O
# ---------------------------------------------------------------------------


def estimates_to_dicts(theta: np.ndarray) -> list[dict]:
    out = []
    for alpha, x, y in np.asarray(theta, dtype=float).reshape(-1, 3):
        if alpha <= 0:
            continue  # non-physical leftovers are dropped from the report
        out.append({"alpha": float(alpha), "x": float(x), "y": float(y)})
    return out
