import math

import numpy as np
import pytest

import vins


def test_quaternion_helpers():
    qz = np.array([math.cos(math.pi / 4), 0.0, 0.0, math.sin(math.pi / 4)])
    np.testing.assert_allclose(vins.rotate(qz, [1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(vins.quat_mul(qz, qz), [0.0, 0.0, 0.0, 1.0], atol=1e-15)
    q = vins.quat_from_rate([0.0, 0.0, 0.5], 0.1)
    assert abs(np.linalg.norm(q) - 1.0) < 1e-15


def test_simulated_straight_walk():
    spec = vins.TrajectorySpec([vins.StraightWalk(1.2, 10.0)], sample_rate=100.0)
    truth = vins.gen_truth(spec)
    assert len(truth) == 1001
    assert abs(np.linalg.norm(truth.p[-1] - truth.p[0]) - 12.0) < 1e-12
    imu = vins.derive_imu(spec)
    np.testing.assert_allclose(imu.acc[:, 2], 9.81, atol=1e-12)
    assert imu.gyro.shape == (1001, 3)


def test_noise_is_seeded():
    spec = vins.TrajectorySpec([vins.Stationary(5.0)])
    clean = vins.derive_imu(spec)
    noise = vins.NoiseSpec(accel_density=0.01, gyro_density=0.001, seed=3)
    a = vins.add_noise(clean, noise)
    b = vins.add_noise(clean, noise)
    np.testing.assert_array_equal(a.acc, b.acc)
    assert not np.array_equal(a.acc, clean.acc)


def test_windows_and_kfold():
    spec = vins.TrajectorySpec([vins.StraightWalk(1.0, 10.0)])
    windows = vins.extract_windows(vins.derive_imu(spec), vins.gen_truth(spec))
    assert len(windows) == 9
    assert windows[0].data.shape == (6, 200)
    assert all(abs(w.label_speed - 1.0) < 1e-3 for w in windows)
    folds = np.array(vins.kfold_split(103, 10, seed=1))
    sizes = np.bincount(folds, minlength=10)
    assert sizes.sum() == 103 and set(sizes) <= {10, 11}


def test_train_predict_and_weights_round_trip(tmp_path):
    spec_slow = vins.TrajectorySpec([vins.StraightWalk(0.6, 12.0, 1.6, 1.0)])
    spec_fast = vins.TrajectorySpec([vins.StraightWalk(1.4, 12.0, 2.2, 3.0)], seed=1)
    windows = []
    for spec in (spec_slow, spec_fast):
        windows += vins.extract_windows(vins.derive_imu(spec), vins.gen_truth(spec), window_seconds=0.4,
                                        stride_seconds=1.0)
    arch = vins.NetArch(input_length=40, channels=[6, 8, 8, 8], hidden=[16, 4])
    params, losses = vins.train(windows, epochs=30, batch_size=10, learning_rate=1e-3, seed=4, arch=arch)
    assert len(losses) == 30 and all(math.isfinite(x) for x in losses)
    assert losses[-1] < losses[0]
    path = tmp_path / "w.bin"
    vins.save_weights(params, path)
    loaded = vins.load_weights(path)
    assert loaded == params
    assert vins.predict(loaded, windows[0].data) == vins.predict(params, windows[0].data)
    rmse, preds = vins.evaluate(params, windows)
    ref = math.sqrt(np.mean((np.array(preds) - np.array([w.label_speed for w in windows])) ** 2))
    assert abs(rmse - ref) < 1e-12


def test_tracker_modes():
    spec = vins.TrajectorySpec([vins.Stationary(10.0), vins.StraightWalk(0.75, 50.0, 2.0, 2.0)], seed=3)
    truth = vins.gen_truth(spec)
    noise = vins.NoiseSpec(0.02, 0.002, [0.1, -0.1, 0.05], [0.01, -0.01, 0.01], seed=1)
    imu = vins.add_noise(vins.derive_imu(spec), noise)
    fixes = vins.sample_fixes(truth, 17.0, 0.05)
    rmse = {}
    for mode in ("none", "constant"):
        traj = vins.run_tracker(imu, fixes, mode=mode)
        assert traj["p"].shape == (len(imu), 3)
        rmse[mode] = vins.trajectory_rmse(traj["t"], traj["p"], truth)
    assert rmse["none"] > rmse["constant"]
    with pytest.raises(vins.VinsError):
        vins.run_tracker(imu, fixes, mode="cnn")


def test_errors_carry_kind(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,ax,ay,az,gx,gy,gz\n0,1,2\n")
    with pytest.raises(vins.VinsError) as info:
        vins.load_imu_csv(bad)
    assert info.value.kind == "MalformedRow"
    with pytest.raises(vins.VinsError) as info:
        vins.gen_truth(vins.TrajectorySpec([]))
    assert info.value.kind == "BadSpec"


def test_cli_round_trip(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text('{"segments": [{"type": "stationary", "duration": 10}]}')
    code, out, err = vins.run_cli(["simulate", "--spec", str(spec), "--out-imu", str(tmp_path / "imu.csv"),
                                   "--out-pose", str(tmp_path / "pose.csv")])
    assert code == 0, err
    assert "simulated 1001 samples" in out
    code, _, _ = vins.run_cli(["train", "--imu", str(tmp_path / "imu.csv")])
    assert code == 2
    assert vins.__version__ == "0.1.0"
