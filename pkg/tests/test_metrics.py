"""Distribution metrics, config round-trips, and checkpoint persistence."""

import numpy as np
import pytest

import tfdl
from tfdl.metrics import _sliced_w2_dirs, mmd_rbf, sliced_w2
from tfdl.runio import RunConfig, load_net, save_net


def test_sliced_w2_identical_multisets():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((256, 2))
    assert sliced_w2(a, a.copy(), n_proj=32, seed=1) <= 1e-12


def test_sliced_w2_point_masses_along_axis():
    d = 1.7
    a = np.zeros((64, 2))
    b = np.zeros((64, 2))
    b[:, 0] = d
    dirs = np.array([[1.0, 0.0]])
    assert _sliced_w2_dirs(a, b, dirs) == pytest.approx(d, abs=1e-15)


def test_sliced_w2_translation_covariance():
    # E |<u, c>| over random directions is (2/pi) ||c||, inside [0.6, 1] ||c||
    rng = np.random.default_rng(2)
    a = rng.standard_normal((512, 2))
    c = np.array([0.8, -0.6])
    val = sliced_w2(a, a + c, n_proj=512, seed=3)
    assert 0.6 * np.linalg.norm(c) <= val <= np.linalg.norm(c)


def test_sliced_w2_size_mismatch():
    with pytest.raises(ValueError):
        sliced_w2(np.zeros((4, 2)), np.zeros((5, 2)))


def test_mmd_identical_samples_clamped_to_zero():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((128, 2))
    assert mmd_rbf(a, a.copy()) == 0.0


def test_mmd_same_distribution_within_permutation_noise():
    rng = np.random.default_rng(5)
    pool = rng.standard_normal((256, 2))
    a, b = pool[:128], pool[128:]
    value = mmd_rbf(a, b)
    perms = []
    for k in range(200):
        idx = np.random.default_rng(100 + k).permutation(256)
        perms.append(mmd_rbf(pool[idx[:128]], pool[idx[128:]]))
    assert value <= np.mean(perms) + 3 * np.std(perms)


def test_mmd_far_clusters_saturate():
    a = np.zeros((64, 2))
    b = np.full((64, 2), 50.0)
    assert mmd_rbf(a, b, bandwidth=1.0) == pytest.approx(2.0, abs=1e-12)


def test_mmd_symmetric():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((64, 2))
    b = rng.standard_normal((64, 2)) + 0.5
    assert mmd_rbf(a, b) == pytest.approx(mmd_rbf(b, a), rel=1e-12)


def test_runconfig_roundtrip():
    cfg = RunConfig()
    cfg.dataset.name = "two-moons"
    cfg.distill.lambda_adv = 0.25
    cfg.distill.cfg_scales = (3.0, 4.0)
    text = cfg.to_json()
    back = RunConfig.from_json(text)
    assert back.to_json() == text
    assert back.dataset.name == "two-moons"
    assert back.distill.lambda_adv == 0.25
    assert back.distill.cfg_scales == (3.0, 4.0)


def test_checkpoint_roundtrip_bitwise(tmp_path):
    net = tfdl.VelocityNet(3, seed=7, zero_out=False)
    p1 = tmp_path / "a.ckpt"
    p2 = tmp_path / "b.ckpt"
    save_net(p1, net, {"sigma_d": 0.5, "role": "student"})
    loaded, meta = load_net(p1)
    assert meta["sigma_d"] == 0.5
    np.testing.assert_array_equal(loaded.params.flat, net.params.flat)
    assert loaded.qk_norm == net.qk_norm
    assert loaded.c_noise_scale == net.c_noise_scale
    save_net(p2, loaded, {"sigma_d": 0.5, "role": "student"})
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_net(tmp_path / "missing.ckpt")


def test_csv_quoting(tmp_path):
    from tfdl.runio import write_csv
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [["x,y", 1.5], ["plain", 2]])
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    assert lines[1] == '"x,y",1.5'
