"""Tests for the thin-client CLI."""

import json

import pytest

from radsurveyor import cli, mission

SCENARIO = {
    "name": "cli",
    "seed": 5,
    "area": {"width": 40.0, "height": 30.0},
    "terrain": {"width": 40.0, "height": 30.0, "cell_size": 0.5, "base_height": 10.0, "seed": 5},
    "config": {
        "grid_cell_size": 0.5,
        "aerial": {"strip_spacing": 5.0},
        "roi": {"downsample": 2},
        "localization": {"grid_cell_size": 0.5},
    },
    "sources": [{"id": "a", "zone": 1, "isotope": "Co60", "activity_mbq": 400.0, "x": 20.0, "y": 15.0}],
    "background_cps": 100.0,
    "operator": {
        "unload_points": {"points": [[3.0, 3.0]]},
        "validate_obstacles": {"confirmed": True},
    },
}


@pytest.fixture()
def scenario_file(tmp_path):
    p = tmp_path / "scenario.json"
    p.write_text(json.dumps(SCENARIO))
    return p


def test_new_run_all_report(tmp_path, scenario_file, capsys):
    d = str(tmp_path / "m")
    assert cli.main(["new", "--mission-dir", d, "--scenario", str(scenario_file)]) == 0
    assert cli.main(["run-all", "--mission-dir", d]) == 0
    out = capsys.readouterr().out
    assert "mission complete" in out
    assert cli.main(["report", "--mission-dir", d]) == 0
    out = capsys.readouterr().out
    assert "Source" in out and "a" in out
    state = mission.Mission(d).load_state()
    assert state["stage"] == "Localized"


def test_single_stage_and_state(tmp_path, scenario_file, capsys):
    d = str(tmp_path / "m")
    cli.main(["new", "--mission-dir", d, "--scenario", str(scenario_file)])
    assert cli.main(["run", "TerrainReady", "--mission-dir", d]) == 0
    capsys.readouterr()
    assert cli.main(["state", "--mission-dir", d]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["stage"] == "TerrainReady"


def test_out_of_order_stage_fails(tmp_path, scenario_file, capsys):
    d = str(tmp_path / "m")
    cli.main(["new", "--mission-dir", d, "--scenario", str(scenario_file)])
    with pytest.raises(SystemExit):
        cli.main(["run", "Localized", "--mission-dir", d])
    err = capsys.readouterr().err
    assert "sequencing" in err


def test_report_before_localized_fails(tmp_path, scenario_file, capsys):
    d = str(tmp_path / "m")
    cli.main(["new", "--mission-dir", d, "--scenario", str(scenario_file)])
    with pytest.raises(SystemExit):
        cli.main(["report", "--mission-dir", d])
    assert "not_found" in capsys.readouterr().err


def test_new_with_bundled_scenario_and_seed(tmp_path):
    d = str(tmp_path / "m")
    assert cli.main(["new", "--mission-dir", d, "--scenario", "two_zone_trial", "--seed", "99"]) == 0
    cfg = json.loads((tmp_path / "m" / "config.json").read_text())
    assert cfg["seed"] == 99


def test_seed_changes_artifacts(tmp_path, scenario_file):
    import hashlib
    from pathlib import Path

    digests = []
    for seed in ("101", "102"):
        d = tmp_path / f"m{seed}"
        cli.main(["new", "--mission-dir", str(d), "--scenario", str(scenario_file), "--seed", seed])
        cli.main(["run-all", "--mission-dir", str(d)])
        digests.append(hashlib.sha256(Path(d, "artifacts", "aerial_measurements.csv").read_bytes()).hexdigest())
    assert digests[0] != digests[1]
