import json

import pytest

from specksim.cli import main

SCENARIO = """\
seed: 7
duration: 2.0
dt: 0.01
mode: pointcloud_render
swarm: {illuminating: 3, standby: 0}
pointcloud:
  path: cloud.xyz
  count: 3
"""

CLOUD = """\
0.0 0.0 2.0 255 255 255
1.0 0.0 2.0 255 255 255
0.0 1.0 2.0 255 255 255
0.5 0.5 2.5 255 255 255
"""


@pytest.fixture
def workspace(tmp_path):
    (tmp_path / "scenario.yaml").write_text(SCENARIO)
    (tmp_path / "cloud.xyz").write_text(CLOUD)
    return tmp_path


def test_validate_ok(workspace, capsys):
    code = main(["validate", str(workspace / "scenario.yaml")])
    assert code == 0
    assert "valid" in capsys.readouterr().out


def test_validate_bad_scenario(workspace, capsys):
    bad = workspace / "bad.yaml"
    bad.write_text(SCENARIO.replace("duration: 2.0", "duration: -1"))
    assert main(["validate", str(bad)]) == 1
    assert "duration" in capsys.readouterr().err


def test_validate_missing_file(workspace, capsys):
    assert main(["validate", str(workspace / "nope.yaml")]) == 1


def test_run_writes_outputs(workspace, capsys):
    out = workspace / "out"
    code = main(["run", str(workspace / "scenario.yaml"), "-o", str(out)])
    assert code == 0
    metrics = json.loads((out / "summary.json").read_text())
    assert metrics["collision_events"] == 0
    traj = (out / "trajectory.log").read_text()
    assert traj.startswith("0.000000 fls000")
    assert (out / "roles.log").exists()
    stdout = capsys.readouterr().out
    assert json.loads(stdout)["collision_events"] == 0


def test_run_seed_override_changes_logs(workspace):
    out_a = workspace / "a"
    out_b = workspace / "b"
    assert main(["run", str(workspace / "scenario.yaml"), "-o", str(out_a)]) == 0
    assert main(["run", str(workspace / "scenario.yaml"), "-o", str(out_b),
                 "--seed", "99"]) == 0
    assert (out_a / "trajectory.log").read_text() != \
        (out_b / "trajectory.log").read_text()


def test_run_repeat_is_byte_identical(workspace):
    out_a = workspace / "a"
    out_b = workspace / "b"
    main(["run", str(workspace / "scenario.yaml"), "-o", str(out_a)])
    main(["run", str(workspace / "scenario.yaml"), "-o", str(out_b)])
    assert (out_a / "trajectory.log").read_bytes() == \
        (out_b / "trajectory.log").read_bytes()
    assert (out_a / "roles.log").read_bytes() == (out_b / "roles.log").read_bytes()


def test_run_missing_cloud_is_config_error(workspace, capsys):
    (workspace / "cloud.xyz").unlink()
    assert main(["run", str(workspace / "scenario.yaml")]) == 1
    assert "point cloud" in capsys.readouterr().err


def test_downsample_roundtrip(workspace, capsys):
    out = workspace / "small.xyz"
    code = main(["downsample", str(workspace / "cloud.xyz"), "2", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 2
    assert lines[0].split()[:3] == ["0.0", "0.0", "2.0"]


def test_metrics_command(workspace, capsys):
    out = workspace / "out"
    main(["run", str(workspace / "scenario.yaml"), "-o", str(out)])
    capsys.readouterr()
    code = main(["metrics", str(out / "trajectory.log"),
                 str(workspace / "scenario.yaml")])
    assert code == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["collision_events"] == 0


def test_event_trace_written_when_enabled(workspace):
    scen = workspace / "trace.yaml"
    scen.write_text(SCENARIO + "emit_event_trace: true\n")
    out = workspace / "out"
    assert main(["run", str(scen), "-o", str(out)]) == 0
    assert (out / "events.log").read_text().splitlines()[0].endswith("tick")


def test_unreachable_server_is_runtime_error(workspace, capsys):
    code = main(["--server", "http://127.0.0.1:1",
                 "validate", str(workspace / "scenario.yaml")])
    assert code == 2
