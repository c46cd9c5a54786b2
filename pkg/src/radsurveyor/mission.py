"""Mission orchestration: the staged survey pipeline with persisted artifacts.

A mission lives in one directory:

    mission.json            state (stage, version, artifact listing)
    config.json             full pipeline configuration
    scenario.json           synthetic world description
    artifacts/<stage files> per-stage outputs, written atomically
    operator/<input>.json   persisted operator inputs (gates)

Every artifact embeds the chained hash of the configuration, scenario,
and operator inputs that produced it, so re-running a stage under a
changed configuration is refused unless forced, and identical inputs
reproduce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
import math
import os
from pathlib import Path

import numpy as np

from . import aerial, coverage, fieldsim, gridding, locate, routing, traverse
from .errors import (
    ConfigError,
    PendingInputError,
    SequencingError,
    StaleArtifactError,
    UnreachableError,
)
from .geo import (
    RegionPolygon,
    Trajectory,
    dem_from_dict,
    dem_to_dict,
    polygon_from_dict,
    polygon_to_dict,
    trajectory_from_dict,
    trajectory_to_dict,
    gridmap_to_dict,
    binarygrid_to_dict,
    binarygrid_from_dict,
)

STAGES = [
    "Created",
    "TerrainReady",
    "AerialPlanned",
    "AerialSurveyed",
    "RoisDetected",
    "ObstaclesReady",
    "ObstaclesValidated",
    "CoveragePlanned",
    "RoutesPlanned",
    "GroundSurveyed",
    "Localized",
]

PRIMARY_ARTIFACT = {
    "TerrainReady": "terrain.json",
    "AerialPlanned": "aerial_plan.json",
    "AerialSurveyed": "aerial_measurements.csv",
    "RoisDetected": "rois.json",
    "ObstaclesReady": "fused_raw.json",
    "ObstaclesValidated": "fused_map.json",
    "CoveragePlanned": "coverage_plans.json",
    "RoutesPlanned": "route_plan.json",
    "GroundSurveyed": "ground_measurements.csv",
    "Localized": "report.json",
}

# operator files a stage consumes (and is gated on, when required=True)
OPERATOR_INPUTS = {
    "RoisDetected": [("roi_margin", False)],
    "ObstaclesValidated": [("obstacles", False), ("validate_obstacles", True)],
    "CoveragePlanned": [("sweep_dir", False)],
    "RoutesPlanned": [("unload_points", True)],
}

DEFAULT_CONFIG = {
    "grid_cell_size": 0.25,
    "aerial": {
        "strip_spacing": 10.0,
        "heading_deg": 0.0,
        "speed": 2.0,
        "sampling_period": 1.0,
        "agl_height": 15.0,
        "segment_size": 10.0,
        "filter_window": 5,
    },
    "roi": {
        "downsample": 4,
        "min_samples": 4,
        "erode_radius": 1.5,
        "dilate_radius": 0.0,
        "max_vertices": 7,
        "margin": 0.0,
    },
    "obstacle": {"max_slope_deg": 16.0, "max_step": 0.16, "pixel_size": 0.5},
    "regions": {"min_area_cells": 4, "max_vertices": 64},
    "coverage": {
        "line_spacing": 2.0,
        "clearance": 0.2,
        "endpoint_inset": 0.25,
        "sweep": "auto",
        "speed": 0.6,
        "sampling_period": 1.0,
    },
    "routing": {"inflate_cells": 1, "allow_reverse": True},
    "localization": {
        "tol": 1e-8,
        "max_iter": 100,
        "min_samples": 4,
        "max_match": 3.0,
        "detector_height": 0.5,
        "grid_cell_size": 0.25,
    },
    "seed": None,
}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data)
    os.replace(tmp, path)


def deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def validate_config(cfg: dict) -> None:
    checks = [
        (cfg["grid_cell_size"] > 0, "grid_cell_size must be positive"),
        (cfg["aerial"]["strip_spacing"] > 0, "aerial.strip_spacing must be positive"),
        (cfg["aerial"]["speed"] > 0, "aerial.speed must be positive"),
        (cfg["aerial"]["agl_height"] > 0, "aerial.agl_height must be positive"),
        (cfg["aerial"]["segment_size"] > 0, "aerial.segment_size must be positive"),
        (cfg["aerial"]["filter_window"] >= 1 and cfg["aerial"]["filter_window"] % 2 == 1,
         "aerial.filter_window must be odd"),
        (cfg["roi"]["downsample"] >= 1, "roi.downsample must be >= 1"),
        (cfg["roi"]["min_samples"] >= 1, "roi.min_samples must be >= 1"),
        (cfg["roi"]["max_vertices"] >= 3, "roi.max_vertices must be >= 3"),
        (0 < cfg["obstacle"]["max_slope_deg"] < 90, "obstacle.max_slope_deg must be in (0, 90)"),
        (cfg["obstacle"]["max_step"] >= 0, "obstacle.max_step must be >= 0"),
        (cfg["coverage"]["line_spacing"] > 0, "coverage.line_spacing must be positive"),
        (cfg["routing"]["inflate_cells"] >= 0, "routing.inflate_cells must be >= 0"),
        (cfg["localization"]["detector_height"] > 0, "localization.detector_height must be positive"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)


def load_scenario(name_or_path: str) -> dict:
    p = Path(name_or_path)
    if p.exists():
        return json.loads(p.read_text())
    res = importlib.resources.files("radsurveyor.scenarios").joinpath(f"{name_or_path}.json")
    if res.is_file():
        return json.loads(res.read_text())
    raise ConfigError(f"scenario not found: {name_or_path}")


class Mission:
    """Handle on one mission directory (cheap to construct, stateless)."""

    def __init__(self, mission_dir):
        self.dir = Path(mission_dir)

    # -- paths ------------------------------------------------------------

    @property
    def state_path(self) -> Path:
        return self.dir / "mission.json"

    @property
    def artifacts_dir(self) -> Path:
        return self.dir / "artifacts"

    @property
    def operator_dir(self) -> Path:
        return self.dir / "operator"

    def artifact_path(self, name: str) -> Path:
        return self.artifacts_dir / name

    # -- state ------------------------------------------------------------

    def load_state(self) -> dict:
        if not self.state_path.exists():
            raise ConfigError(f"not a mission directory: {self.dir}")
        return json.loads(self.state_path.read_text())

    def save_state(self, state: dict) -> None:
        _atomic_write(self.state_path, canonical_json(state))

    def load_config(self) -> dict:
        return json.loads((self.dir / "config.json").read_text())

    def load_scenario(self) -> dict:
        return json.loads((self.dir / "scenario.json").read_text())

    def operator_input(self, name: str):
        p = self.operator_dir / f"{name}.json"
        if not p.exists():
            return None
        return json.loads(p.read_text())

    def set_operator_input(self, name: str, payload: dict) -> dict:
        """Persist an operator input and bump the state version."""
        self.operator_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(self.operator_dir / f"{name}.json", canonical_json(payload))
        state = self.load_state()
        state["version"] += 1
        self.save_state(state)
        return state

    # -- hashing ----------------------------------------------------------

    def expected_hash(self, stage: str) -> str:
        cfg = self.load_config()
        scen = self.load_scenario()
        h = hashlib.sha256(canonical_json({"config": cfg, "scenario": scen}).encode()).hexdigest()
        for s in STAGES[1 : STAGES.index(stage) + 1]:
            ops = {}
            for op_name, _required in OPERATOR_INPUTS.get(s, []):
                ops[op_name] = self.operator_input(op_name)
            h = hashlib.sha256(f"{h}|{s}|{canonical_json(ops)}".encode()).hexdigest()
        return h

    def stale_stages(self) -> list[str]:
        """Completed stages whose artifacts no longer match current inputs."""
        state = self.load_state()
        out = []
        for stage, files in state.get("artifacts", {}).items():
            path = self.artifact_path(files[0])
            if not path.exists():
                out.append(stage)
                continue
            if self._artifact_hash(path) != self.expected_hash(stage):
                out.append(stage)
        return sorted(out, key=STAGES.index)

    def _artifact_hash(self, path: Path) -> str | None:
        if path.suffix == ".csv":
            first = path.read_text().splitlines()[0]
            if first.startswith("# inputs_hash="):
                return first.split("=", 1)[1].strip()
            return None
        try:
            return json.loads(path.read_text()).get("inputs_hash")
        except json.JSONDecodeError:
            return None

    # -- artifact io --------------------------------------------------------

    def write_json_artifact(self, name: str, payload: dict, stage: str) -> None:
        self.artifacts_dir.mkdir(parents=True, exist_ok=True)
        payload = dict(payload)
        payload["inputs_hash"] = self.expected_hash(stage)
        _atomic_write(self.artifact_path(name), canonical_json(payload))

    def write_csv_artifact(self, name: str, body: str, stage: str) -> None:
        self.artifacts_dir.mkdir(parents=True, exist_ok=True)
        text = f"# inputs_hash={self.expected_hash(stage)}\n{body}"
        _atomic_write(self.artifact_path(name), text)

    def read_json_artifact(self, name: str) -> dict:
        return json.loads(self.artifact_path(name).read_text())

    def read_measurements(self, name: str):
        return fieldsim.measurements_from_csv(self.artifact_path(name).read_text())

    # -- seeds --------------------------------------------------------------

    def seed(self) -> int:
        cfg = self.load_config()
        if cfg.get("seed") is not None:
            return int(cfg["seed"])
        return int(self.load_scenario().get("seed", 0))


def create_mission(mission_dir, scenario, config_override=None, seed=None) -> Mission:
    """Initialize a mission directory from a scenario (name, path, or dict)."""
    m = Mission(mission_dir)
    m.dir.mkdir(parents=True, exist_ok=True)
    if m.state_path.exists():
        raise ConfigError(f"mission already exists in {m.dir}")
    scen = scenario if isinstance(scenario, dict) else load_scenario(scenario)
    cfg = deep_merge(DEFAULT_CONFIG, scen.get("config", {}))
    cfg = deep_merge(cfg, config_override or {})
    if seed is not None:
        cfg["seed"] = int(seed)
    validate_config(cfg)
    _atomic_write(m.dir / "config.json", canonical_json(cfg))
    _atomic_write(m.dir / "scenario.json", canonical_json(scen))
    m.operator_dir.mkdir(exist_ok=True)
    for name, payload in (scen.get("operator") or {}).items():
        _atomic_write(m.operator_dir / f"{name}.json", canonical_json(payload))
    m.artifacts_dir.mkdir(exist_ok=True)
    m.save_state({"stage": "Created", "version": 1, "artifacts": {}})
    return m


# ---------------------------------------------------------------------------
# Stage implementations
# ---------------------------------------------------------------------------


def _stage_terrain(m: Mission) -> dict:
    scen = m.load_scenario()
    if "terrain_file" in scen:
        from .geo import load_dem

        dem = load_dem(scen["terrain_file"])
    else:
        dem = fieldsim.synth_terrain(scen["terrain"])
    m.write_json_artifact("terrain.json", dem_to_dict(dem), "TerrainReady")
    return {"TerrainReady": ["terrain.json"]}


def _load_dem(m: Mission):
    return dem_from_dict(m.read_json_artifact("terrain.json"))


def _stage_aerial_plan(m: Mission) -> dict:
    cfg = m.load_config()["aerial"]
    scen = m.load_scenario()
    dem = _load_dem(m)
    w = float(scen["area"]["width"])
    h = float(scen["area"]["height"])
    area = RegionPolygon(np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]]) + [dem.origin_x, dem.origin_y])
    plan2d = aerial.plan_strips(
        aerial.StripPlanConfig(
            area=area,
            strip_spacing=cfg["strip_spacing"],
            heading=math.radians(cfg["heading_deg"]),
            speed=cfg["speed"],
            sampling_period=cfg["sampling_period"],
        )
    )
    traj = aerial.adjust_terrain_following(
        plan2d,
        dem,
        aerial.TerrainFollowConfig(
            agl_height=cfg["agl_height"],
            segment_size=cfg["segment_size"],
            filter_window=cfg["filter_window"],
        ),
    )
    m.write_json_artifact("aerial_plan.json", trajectory_to_dict(traj), "AerialPlanned")
    return {"AerialPlanned": ["aerial_plan.json"]}


def _stage_aerial_survey(m: Mission) -> dict:
    scen = m.load_scenario()
    dem = _load_dem(m)
    traj = trajectory_from_dict(m.read_json_artifact("aerial_plan.json"))
    field = fieldsim.field_from_scenario(scen)
    ms = fieldsim.simulate_survey(field, dem, traj, z_agl_mode="aerial", seed=m.seed(), with_windows=True)
    m.write_csv_artifact("aerial_measurements.csv", fieldsim.measurements_to_csv(ms), "AerialSurveyed")
    return {"AerialSurveyed": ["aerial_measurements.csv"]}


def _stage_rois(m: Mission) -> dict:
    cfg = m.load_config()
    roi_cfg = cfg["roi"]
    ms = m.read_measurements("aerial_measurements.csv")
    ds = gridding.downsample_by_summing(ms, int(roi_cfg["downsample"]))
    thr = gridding.adaptive_thresholds([x.counts for x in ds])
    grid = gridding.interpolate_grid(ds, float(cfg["grid_cell_size"]))
    hotspots = gridding.extract_hotspots(
        grid,
        thr,
        ds,
        min_samples=int(roi_cfg["min_samples"]),
        erode_r=float(roi_cfg["erode_radius"]),
        dilate_r=float(roi_cfg["dilate_radius"]),
        max_vertices=int(roi_cfg["max_vertices"]),
    )
    margin_input = m.operator_input("roi_margin")
    margin = float(margin_input["margin"]) if margin_input else float(roi_cfg["margin"])
    polygons = [h.polygon for h in hotspots]
    if margin > 0:
        polygons = enlarge_rois(polygons, margin)
    payload = {
        "thresholds": {
            "t_bg": thr.t_bg, "t_hot": thr.t_hot,
            "mu": thr.mu, "sigma": thr.sigma, "mu_bg": thr.mu_bg, "sigma_bg": thr.sigma_bg,
        },
        "margin": margin,
        "hotspots": gridding.hotspots_to_dicts(hotspots),
        "rois": [polygon_to_dict(p) for p in polygons],
    }
    m.write_json_artifact("rois.json", payload, "RoisDetected")
    m.write_json_artifact("aerial_grid.json", gridmap_to_dict(grid), "RoisDetected")
    return {"RoisDetected": ["rois.json", "aerial_grid.json"]}


def enlarge_rois(rois: list[RegionPolygon], margin: float) -> list[RegionPolygon]:
    """Minkowski dilation of each ROI envelope by a disc of radius margin."""
    if margin < 0:
        raise ConfigError("margin must be >= 0")
    if margin == 0:
        return list(rois)
    from shapely.geometry import Polygon

    out = []
    for p in rois:
        grown = Polygon(p.envelope).buffer(margin, quad_segs=16)
        out.append(RegionPolygon(np.asarray(grown.exterior.coords[:-1])))
    return out


def _stage_obstacles(m: Mission) -> dict:
    cfg = m.load_config()
    dem = _load_dem(m)
    ob_cfg = traverse.ObstacleConfig(
        max_slope_deg=float(cfg["obstacle"]["max_slope_deg"]),
        max_step=float(cfg["obstacle"]["max_step"]),
        pixel_size=float(cfg["obstacle"]["pixel_size"]),
    )
    obstacle_grid = traverse.obstacle_map(dem, ob_cfg)
    rois_art = m.read_json_artifact("rois.json")
    rois = [polygon_from_dict(d) for d in rois_art["rois"]]
    cell = float(cfg["grid_cell_size"])
    rows = int(round(dem.rows * dem.cell_size / cell))
    cols = int(round(dem.cols * dem.cell_size / cell))
    roi_grid = traverse.roi_grid_from_polygons(rois, dem.origin_x, dem.origin_y, rows, cols, cell)
    fused = traverse.fuse_maps(roi_grid, obstacle_grid)
    m.write_json_artifact("obstacle_map.json", binarygrid_to_dict(obstacle_grid), "ObstaclesReady")
    m.write_json_artifact("fused_raw.json", traverse.fusedmap_to_dict(fused), "ObstaclesReady")
    return {"ObstaclesReady": ["fused_raw.json", "obstacle_map.json"]}


def _stage_obstacles_validated(m: Mission) -> dict:
    fused = traverse.fusedmap_from_dict(m.read_json_artifact("fused_raw.json"))
    manual = m.operator_input("obstacles") or {"polygons": []}
    polys = [polygon_from_dict(d) for d in manual.get("polygons", [])]
    fused = traverse.apply_manual_obstacles(fused, polys)
    payload = traverse.fusedmap_to_dict(fused)
    payload["manual_obstacles"] = manual.get("polygons", [])
    m.write_json_artifact("fused_map.json", payload, "ObstaclesValidated")
    return {"ObstaclesValidated": ["fused_map.json"]}


def _stage_coverage(m: Mission) -> dict:
    cfg = m.load_config()
    cov = cfg["coverage"]
    fused = traverse.fusedmap_from_dict(m.read_json_artifact("fused_map.json"))
    cell = fused.grid.cell_size
    min_area = int(cfg["regions"]["min_area_cells"]) * cell * cell
    regions = traverse.extract_regions(fused, min_area=min_area, max_vertices=int(cfg["regions"]["max_vertices"]))
    sweep_input = m.operator_input("sweep_dir") or {"mode": cov["sweep"]}
    plans = []
    for region in regions:
        if sweep_input.get("mode") == "fixed":
            sweep = float(sweep_input["radians"])
        else:
            sweep = coverage.auto_sweep_dir(region)
        dec = coverage.decompose_boustrophedon(region, sweep)
        order = coverage.order_cells(dec, 0)
        plan = coverage.coverage_trajectory(
            dec,
            order,
            line_spacing=float(cov["line_spacing"]),
            holes=list(region.holes),
            clearance=float(cov["clearance"]),
            endpoint_inset=float(cov["endpoint_inset"]),
        )
        entry = plan.waypoints[0]
        exit_ = plan.waypoints[-1]
        plans.append(
            {
                "region": polygon_to_dict(region),
                "entry": [float(entry[0]), float(entry[1])],
                "exit": [float(exit_[0]), float(exit_[1])],
                "survey_length": plan.survey_length,
                "total_length": plan.total_length,
                **coverage.plan_to_dict(plan, dec),
            }
        )
    m.write_json_artifact("coverage_plans.json", {"regions": plans}, "CoveragePlanned")
    return {"CoveragePlanned": ["coverage_plans.json"]}


def _stage_routes(m: Mission) -> dict:
    cfg = m.load_config()
    plans = m.read_json_artifact("coverage_plans.json")["regions"]
    obstacle_grid = binarygrid_from_dict(m.read_json_artifact("obstacle_map.json"))
    grid = routing.inflate(obstacle_grid, int(cfg["routing"]["inflate_cells"]))
    unload_input = m.operator_input("unload_points")
    unloads = [tuple(p) for p in (unload_input or {}).get("points", [])]
    snapped_unloads = []
    for u in unloads:
        c = routing.nearest_free(grid, grid.index_of(*u), max_radius=8)
        snapped_unloads.append(grid.cell_center(*c))
    rois = []
    reachable = []
    base_cell = grid.index_of(*snapped_unloads[0])
    for k, plan in enumerate(plans):
        try:
            # endpoints may shift at most 1 m; snapping further would let a
            # trajectory endpoint jump across an obstacle ring
            entry = routing.nearest_free(grid, grid.index_of(*plan["entry"]), max_radius=2)
            exit_ = routing.nearest_free(grid, grid.index_of(*plan["exit"]), max_radius=2)
            routing.astar(grid, base_cell, entry)
            rois.append((grid.cell_center(*entry), grid.cell_center(*exit_)))
            reachable.append(k)
        except UnreachableError:
            continue  # regions sealed off by terrain are dropped from the tour
    if not rois:
        raise UnreachableError("no region is reachable from the unload candidates")
    plan = routing.plan_routes(grid, snapped_unloads, rois, allow_reverse=bool(cfg["routing"]["allow_reverse"]))
    payload = plan.to_dict()
    payload["region_indices"] = reachable
    payload["unreachable_regions"] = [k for k in range(len(plans)) if k not in reachable]
    m.write_json_artifact("route_plan.json", payload, "RoutesPlanned")
    return {"RoutesPlanned": ["route_plan.json"]}


def _stage_ground_survey(m: Mission) -> dict:
    cfg = m.load_config()
    cov = cfg["coverage"]
    scen = m.load_scenario()
    dem = _load_dem(m)
    field = fieldsim.field_from_scenario(scen)
    plans = m.read_json_artifact("coverage_plans.json")["regions"]
    surveyed = m.read_json_artifact("route_plan.json")["region_indices"]
    all_ms = []
    index = []
    for k in surveyed:
        wp = np.asarray(plans[k]["waypoints"], dtype=float)
        traj = Trajectory(
            np.column_stack([wp, np.zeros(len(wp))]),
            speed=float(cov["speed"]),
            sampling_period=float(cov["sampling_period"]),
        )
        ms = fieldsim.simulate_survey(
            field,
            dem,
            traj,
            z_agl_mode="ground",
            seed=m.seed() + 1000 + k,
            ground_height=float(cfg["localization"]["detector_height"]),
            with_windows=True,
        )
        index.append({"region": k, "start": len(all_ms), "count": len(ms)})
        all_ms.extend(ms)
    m.write_csv_artifact("ground_measurements.csv", fieldsim.measurements_to_csv(all_ms), "GroundSurveyed")
    m.write_json_artifact("ground_index.json", {"regions": index}, "GroundSurveyed")
    return {"GroundSurveyed": ["ground_measurements.csv", "ground_index.json"]}


def _stage_localized(m: Mission) -> dict:
    cfg = m.load_config()
    loc = cfg["localization"]
    scen = m.load_scenario()
    ms = m.read_measurements("ground_measurements.csv")
    index = m.read_json_artifact("ground_index.json")["regions"]
    plans = m.read_json_artifact("coverage_plans.json")["regions"]
    route = m.read_json_artifact("route_plan.json")
    estimates = []
    region_fits = []
    for entry in index:
        seg = ms[entry["start"] : entry["start"] + entry["count"]]
        if len(seg) < 8:
            continue
        grid = gridding.interpolate_grid(seg, float(loc["grid_cell_size"]))
        peaks = locate.count_peaks(grid, seg, min_samples=int(loc["min_samples"]))
        if peaks.r == 0:
            region_fits.append({"region": entry["region"], "sources": 0})
            continue
        h = float(np.mean([x.z_agl for x in seg]))
        theta0 = locate.init_parameters(peaks.contours, grid, h, mu_bg=peaks.thresholds.mu_bg)
        report = locate.gauss_newton(
            theta0, seg, h,
            tol=float(loc["tol"]), max_iter=int(loc["max_iter"]), mu_bg=peaks.thresholds.mu_bg,
        )
        region_fits.append(
            {
                "region": entry["region"],
                "sources": peaks.r,
                "iterations": report.iterations,
                "converged": report.converged,
                "t_bg": peaks.thresholds.t_bg,
                "t_hot": peaks.thresholds.t_hot,
            }
        )
        estimates.extend(report.theta.tolist())
    theta = np.asarray(estimates, dtype=float).reshape(-1, 3)
    truth = [
        fieldsim.RadSource.from_activity(
            s["isotope"], float(s["activity_mbq"]), float(s["x"]), float(s["y"]),
            per_mbq=float(scen.get("calibration", {}).get("emission_per_mbq", fieldsim.DEFAULT_EMISSION_PER_MBQ)),
        )
        for s in scen["sources"]
    ]
    sc = locate.score(theta, truth, max_match=float(loc["max_match"]))
    matched = {t: d for _, t, d in sc.matches}
    surveyed_polys = [polygon_from_dict(plans[k]["region"]) for k in route["region_indices"]]
    dropped_polys = [polygon_from_dict(plans[k]["region"]) for k in route["unreachable_regions"]]
    rows = []
    for t_idx, s in enumerate(scen["sources"]):
        from .geo import point_in_region

        inside_surveyed = any(point_in_region(p, s["x"], s["y"]) for p in surveyed_polys)
        inside_dropped = any(point_in_region(p, s["x"], s["y"]) for p in dropped_polys)
        if t_idx in matched:
            comment = ""
            error = matched[t_idx]
        else:
            error = None
            if inside_dropped and not inside_surveyed:
                comment = "Inaccessible to the UGV"
            elif not inside_surveyed:
                comment = "Outside the ROI"
            else:
                comment = "Not separated"
        rows.append(
            {
                "source": s.get("id", f"t{t_idx}"),
                "zone": s.get("zone"),
                "isotope": s["isotope"],
                "activity_mbq": s["activity_mbq"],
                "error_ugv_m": error,
                "comment": comment,
            }
        )
    errors = [r["error_ugv_m"] for r in rows if r["error_ugv_m"] is not None]
    report_payload = {
        "rows": rows,
        "mean_error_m": float(np.mean(errors)) if errors else None,
        "localized": len(errors),
        "total_sources": len(rows),
        "false_alarms": len(sc.false_alarms),
        "region_fits": region_fits,
    }
    m.write_json_artifact("report.json", report_payload, "Localized")
    m.write_json_artifact("estimates.json", {"estimates": locate.estimates_to_dicts(theta)}, "Localized")
    return {"Localized": ["report.json", "estimates.json"]}


_STAGE_FN = {
    "TerrainReady": _stage_terrain,
    "AerialPlanned": _stage_aerial_plan,
    "AerialSurveyed": _stage_aerial_survey,
    "RoisDetected": _stage_rois,
    "ObstaclesReady": _stage_obstacles,
    "ObstaclesValidated": _stage_obstacles_validated,
    "CoveragePlanned": _stage_coverage,
    "RoutesPlanned": _stage_routes,
    "GroundSurveyed": _stage_ground_survey,
    "Localized": _stage_localized,
}


def run_stage(mission_dir, stage: str, force: bool = False) -> dict:
    """Execute one pipeline stage; returns the updated mission state.

    The previous stage must be complete (artifacts current unless
    force=True) and any gating operator inputs present.
    """
    m = Mission(mission_dir)
    if stage not in _STAGE_FN:
        raise ConfigError(f"unknown stage: {stage}")
    state = m.load_state()
    target_idx = STAGES.index(stage)
    current_idx = STAGES.index(state["stage"])
    if target_idx > current_idx + 1:
        raise SequencingError(
            f"cannot run {stage}: mission is at {state['stage']} and {STAGES[current_idx + 1]} must run first"
        )
    missing = []
    for op_name, required in OPERATOR_INPUTS.get(stage, []):
        if required and m.operator_input(op_name) is None:
            missing.append(op_name)
    if missing:
        raise PendingInputError(
            f"stage {stage} is waiting for operator input: {', '.join(missing)}", missing=missing
        )
    prev_stage = STAGES[target_idx - 1]
    if prev_stage != "Created":
        files = state["artifacts"].get(prev_stage)
        if not files:
            raise SequencingError(f"stage {stage} requires {prev_stage} artifacts")
        if not force:
            embedded = m._artifact_hash(m.artifact_path(files[0]))
            if embedded != m.expected_hash(prev_stage):
                raise StaleArtifactError(
                    f"{prev_stage} artifact was produced under a different configuration; rerun it or use force"
                )
    artifacts = _STAGE_FN[stage](m)
    state = m.load_state()
    state["artifacts"].update(artifacts)
    if target_idx > current_idx:
        state["stage"] = stage
    state["version"] += 1
    m.save_state(state)
    return state


def run_all(mission_dir, force: bool = False) -> dict:
    state = Mission(mission_dir).load_state()
    start = STAGES.index(state["stage"]) + 1
    for stage in STAGES[1:] if force else STAGES[start:]:
        state = run_stage(mission_dir, stage, force=force)
    return state


def render_report_text(report: dict) -> str:
    """Plain-text table mirroring the per-source localization results."""
    lines = []
    header = f"{'Source':<8}{'Zone':<6}{'Isotope':<9}{'MBq':>8}  {'Error [m]':>10}  Comment"
    lines.append(header)
    lines.append("-" * len(header))
    for r in report["rows"]:
        err = f"{r['error_ugv_m']:.3f}" if r["error_ugv_m"] is not None else "--"
        lines.append(
            f"{r['source']:<8}{str(r['zone']):<6}{r['isotope']:<9}{r['activity_mbq']:>8.2f}  {err:>10}  {r['comment']}"
        )
    mean = report.get("mean_error_m")
    lines.append("-" * len(header))
    lines.append(
        f"localized {report['localized']}/{report['total_sources']} sources"
        + (f", mean error {mean:.3f} m" if mean is not None else "")
        + f", {report['false_alarms']} false alarms"
    )
    return "\n".join(lines) + "\n"
