"""Tests for mission orchestration: staging, gates, hashing, determinism."""

import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest

from radsurveyor import mission
from radsurveyor.errors import ConfigError, PendingInputError, SequencingError, StaleArtifactError
from radsurveyor.geo import RegionPolygon, polygon_area, point_in_region


@pytest.fixture(scope="module")
def small_scenario():
    """A reduced scenario that runs the full pipeline in a few seconds."""
    return {
        "name": "mini",
        "seed": 7,
        "area": {"width": 60.0, "height": 50.0},
        "terrain": {
            "width": 60.0,
            "height": 50.0,
            "cell_size": 0.5,
            "base_height": 100.0,
            "seed": 7,
            "features": [
                {"type": "noise", "amplitude": 0.04, "scale": 6.0},
                {"type": "hill", "cx": 50.0, "cy": 42.0, "height": 4.0, "sigma": 5.0},
            ],
        },
        "config": {
            "grid_cell_size": 0.5,
            "coverage": {"line_spacing": 2.0},
            "localization": {"grid_cell_size": 0.5},
        },
        "sources": [
            {"id": "a", "zone": 1, "isotope": "Co60", "activity_mbq": 100.0, "x": 20.0, "y": 25.0},
            {"id": "b", "zone": 1, "isotope": "Cs137", "activity_mbq": 60.0, "x": 40.0, "y": 20.0},
        ],
        "background_cps": 100.0,
        "operator": {
            "unload_points": {"points": [[5.0, 5.0]]},
            "validate_obstacles": {"confirmed": True},
        },
    }


@pytest.fixture(scope="module")
def completed_mission(tmp_path_factory, small_scenario):
    d = tmp_path_factory.mktemp("mission")
    mission.create_mission(d, small_scenario)
    mission.run_all(d)
    return d


def artifact_digests(d):
    out = {}
    for p in sorted(Path(d, "artifacts").iterdir()):
        out[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def test_pipeline_reaches_localized(completed_mission):
    state = mission.Mission(completed_mission).load_state()
    assert state["stage"] == "Localized"
    report = json.loads(Path(completed_mission, "artifacts", "report.json").read_text())
    assert report["localized"] >= 1
    errors = [r["error_ugv_m"] for r in report["rows"] if r["error_ugv_m"] is not None]
    assert all(e < 1.0 for e in errors)


def test_rerun_stage_identical_bytes(completed_mission):
    before = artifact_digests(completed_mission)
    mission.run_stage(completed_mission, "RoisDetected")
    after = artifact_digests(completed_mission)
    assert before == after


def test_full_determinism(tmp_path, small_scenario):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for d in (a, b):
        mission.create_mission(d, small_scenario)
        mission.run_all(d)
    assert artifact_digests(a) == artifact_digests(b)


def test_sequencing_error(tmp_path, small_scenario):
    d = tmp_path / "m"
    mission.create_mission(d, small_scenario)
    with pytest.raises(SequencingError):
        mission.run_stage(d, "AerialSurveyed")


def test_gate_pending_input(tmp_path, small_scenario):
    scen = dict(small_scenario)
    scen["operator"] = {}  # no pre-seeded operator inputs
    d = tmp_path / "m"
    mission.create_mission(d, scen)
    for stage in ["TerrainReady", "AerialPlanned", "AerialSurveyed", "RoisDetected", "ObstaclesReady"]:
        mission.run_stage(d, stage)
    with pytest.raises(PendingInputError) as exc:
        mission.run_stage(d, "ObstaclesValidated")
    assert "validate_obstacles" in exc.value.missing
    m = mission.Mission(d)
    m.set_operator_input("validate_obstacles", {"confirmed": True})
    mission.run_stage(d, "ObstaclesValidated")
    mission.run_stage(d, "CoveragePlanned")
    with pytest.raises(PendingInputError) as exc:
        mission.run_stage(d, "RoutesPlanned")
    assert "unload_points" in exc.value.missing


def test_stale_config_refused_then_forced(tmp_path, small_scenario):
    d = tmp_path / "m"
    mission.create_mission(d, small_scenario)
    mission.run_stage(d, "TerrainReady")
    cfg_path = d / "config.json"
    cfg = json.loads(cfg_path.read_text())
    cfg["aerial"]["agl_height"] = 22.0
    cfg_path.write_text(mission.canonical_json(cfg))
    with pytest.raises(StaleArtifactError):
        mission.run_stage(d, "AerialPlanned")
    mission.run_stage(d, "TerrainReady")  # refresh under the new config
    mission.run_stage(d, "AerialPlanned")


def test_operator_change_marks_downstream_stale(completed_mission):
    m = mission.Mission(completed_mission)
    assert m.stale_stages() == []
    state = m.set_operator_input("unload_points", {"points": [[6.0, 5.0]]})
    try:
        stale = m.stale_stages()
        assert "RoutesPlanned" in stale
        assert "TerrainReady" not in stale
    finally:
        m.set_operator_input("unload_points", {"points": [[5.0, 5.0]]})
        mission.run_all(completed_mission, force=True)


def test_mission_requires_new(tmp_path):
    with pytest.raises(ConfigError):
        mission.Mission(tmp_path / "missing").load_state()
    with pytest.raises(ConfigError):
        mission.run_stage(tmp_path / "missing", "TerrainReady")


def test_create_rejects_existing(tmp_path, small_scenario):
    d = tmp_path / "m"
    mission.create_mission(d, small_scenario)
    with pytest.raises(ConfigError):
        mission.create_mission(d, small_scenario)


def test_bad_config_rejected(tmp_path, small_scenario):
    with pytest.raises(ConfigError):
        mission.create_mission(tmp_path / "m", small_scenario, config_override={"coverage": {"line_spacing": -1}})


def test_csv_artifacts_carry_hash(completed_mission):
    text = Path(completed_mission, "artifacts", "aerial_measurements.csv").read_text()
    assert text.startswith("# inputs_hash=")


def test_json_artifacts_carry_hash(completed_mission):
    payload = json.loads(Path(completed_mission, "artifacts", "terrain.json").read_text())
    assert "inputs_hash" in payload


def test_enlarge_rois_identity_and_area():
    square = RegionPolygon(np.array([[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]]))
    same = mission.enlarge_rois([square], 0.0)
    assert polygon_area(same[0]) == pytest.approx(16.0)
    grown = mission.enlarge_rois([square], 2.0)
    want = 16.0 + 4 * 4 * 2.0 + math.pi * 4.0
    assert polygon_area(grown[0]) == pytest.approx(want, rel=0.01)


def test_enlarge_rois_recovers_excluded_source():
    # a source just outside the ROI falls inside after a 3 m margin
    ring = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]])
    roi = RegionPolygon(ring)
    outside = (12.0, 5.0)
    assert not point_in_region(roi, *outside)
    grown = mission.enlarge_rois([roi], 3.0)[0]
    assert point_in_region(grown, *outside)


def test_render_report_text(completed_mission):
    report = json.loads(Path(completed_mission, "artifacts", "report.json").read_text())
    text = mission.render_report_text(report)
    assert "Source" in text and "Error [m]" in text
    for row in report["rows"]:
        assert row["source"] in text


def test_load_scenario_bundled_and_missing():
    scen = mission.load_scenario("two_zone_trial")
    assert len(scen["sources"]) == 8
    with pytest.raises(ConfigError):
        mission.load_scenario("nope_not_here")
