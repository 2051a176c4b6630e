import math

import numpy as np
import pytest

import fieldloc


def small_config(mode="PPP"):
    return fieldloc.Config.from_text(f"rows = 2\nrow_length = 10\ngps_mode = {mode}\n")


@pytest.fixture(scope="module")
def sim():
    return fieldloc.simulate(small_config())


def test_transform_round_trip():
    rng = np.random.default_rng(5)
    for _ in range(50):
        v = np.concatenate([rng.uniform(-10, 10, 3), rng.uniform(-1, 1, 3)])
        T = fieldloc.to_transform(v)
        assert T.shape == (4, 4)
        assert np.allclose(T[:3, :3] @ T[:3, :3].T, np.eye(3), atol=1e-12)
        assert np.allclose(fieldloc.phi(T), v, atol=1e-12)


def test_half_turn_log():
    R = fieldloc.so3_exp(np.array([math.pi, 0.0, 0.0]))
    r = fieldloc.so3_log(R)
    assert np.isclose(np.linalg.norm(r), math.pi)
    assert np.allclose(fieldloc.so3_exp(r), R, atol=1e-12)


def test_simulation_outputs(sim):
    counts = sim.log.counts()
    assert counts["WO"] > counts["VO"] > counts["LID"] > 0
    assert counts["IMU"] > counts["WO"]
    truth = sim.truth
    assert truth.ndim == 2 and truth.shape[1] == 7
    assert np.all(np.diff(truth[:, 0]) > 0)
    x, y = truth[len(truth) // 2, 1:3]
    assert abs(sim.dem.query(x, y) - truth[len(truth) // 2, 3]) < 0.5


def test_fusion_beats_gps(sim):
    cfg = small_config()
    truth = sim.truth
    gps = fieldloc.run_batch(sim.log, cfg, sim.dem, cues="GPS")
    online = fieldloc.run_online(sim.log, cfg, sim.dem)
    full = fieldloc.run_batch(sim.log, cfg, sim.dem, initial=online)
    g = fieldloc.compute_stats(gps, truth)
    f = fieldloc.compute_stats(full, truth)
    assert f["n"] > 0
    assert f["rmse"] < 0.5 * g["rmse"]
    assert fieldloc.compute_stats(online, truth)["rmse"] < 0.5 * g["rmse"]


def test_files_and_cli(sim, tmp_path):
    sim.write(str(tmp_path))
    log = fieldloc.SensorLog.read(str(tmp_path / "sensors.log"))
    assert log.counts() == sim.log.counts()
    dem = fieldloc.DemGrid.read(str(tmp_path / "dem.txt"))
    assert (dem.rows, dem.cols) == (sim.dem.rows, sim.dem.cols)

    (tmp_path / "small.cfg").write_text("rows = 2\nrow_length = 10\ngps_mode = PPP\n")
    est = tmp_path / "est.txt"
    code, _, err = fieldloc.run_cli([
        "optimize", "--log", str(tmp_path / "sensors.log"), "--dem", str(tmp_path / "dem.txt"),
        "--config", str(tmp_path / "small.cfg"), "--out", str(est),
    ])
    assert code == 0, err
    traj = fieldloc.read_trajectory(str(est))
    fieldloc.write_trajectory(str(tmp_path / "copy.txt"), traj)
    assert (tmp_path / "copy.txt").read_bytes() == est.read_bytes()

    truth = fieldloc.read_ground_truth(str(tmp_path / "truth.gt"))
    assert fieldloc.compute_stats(traj, truth)["rmse"] < 0.5

    code, _, err = fieldloc.run_cli(["optimize", "--log", str(tmp_path / "nope.log"), "--out", str(est)])
    assert code == 2 and "nope.log" in err


def test_errors():
    with pytest.raises(fieldloc.InvalidArgument):
        fieldloc.Config().cues = "GPS+NOPE"
    with pytest.raises(fieldloc.FormatError):
        fieldloc.Config.from_text("not a pair\n")
    with pytest.raises(fieldloc.Error):
        fieldloc.SensorLog.read("/nonexistent/sensors.log")
    cfg = fieldloc.Config()
    cfg.rows = 1
    cfg.row_length = 4
    s = fieldloc.simulate(cfg)
    with pytest.raises(fieldloc.OutOfBounds):
        s.dem.query(1e6, 1e6)
    assert "step_wo" in fieldloc.config_reference()
