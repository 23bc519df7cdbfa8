import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vtolnav.liegroup import exp_so3, upsilon
from vtolnav.measurement import (
    Feature,
    ObservabilityError,
    aggregate,
    aggregate_arrays,
    controller_innovation,
    ground_truth_rm,
    measured_rm,
    observer_innovations,
    position_error_from_innovation,
    synthesize_measurements,
)

from .strategies import rotations, vec3


def test_aggregate_unit_basis():
    fs = aggregate([Feature(np.array(e, dtype=float)) for e in np.eye(3)])
    assert fs.s_total == 3.0
    assert np.allclose(fs.p_c, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)
    assert np.allclose(fs.M, fs.M.T)
    assert np.linalg.eigvalsh(fs.M)[0] >= -1e-15
    assert np.allclose(fs.M_bar, np.trace(fs.M) * np.eye(3) - fs.M)


def test_two_forms_of_M_agree(rng):
    for _ in range(200):
        n = rng.integers(3, 12)
        pts = rng.uniform(-5.0, 5.0, size=(n, 3))
        w = rng.uniform(0.1, 3.0, size=n)
        fs = aggregate_arrays(pts, w)
        d = pts - fs.p_c
        M2 = (d.T * w) @ d
        assert np.max(np.abs(fs.M - M2)) < 1e-12
        assert fs.s_total == pytest.approx(w.sum(), abs=1e-15)


def test_aggregate_rejects_unobservable_sets():
    with pytest.raises(ObservabilityError):
        aggregate_arrays([[0, 0, 0], [1, 1, 1]], [1, 1])
    with pytest.raises(ObservabilityError):
        aggregate_arrays([[0, 0, 0], [1, 2, 3], [2, 4, 6], [-1, -2, -3]], [1, 1, 2, 1])
    with pytest.raises(ValueError):
        Feature(np.zeros(3), 0.0)
    with pytest.raises(ValueError):
        aggregate_arrays(np.eye(3), [1.0, -1.0, 1.0])


def test_coplanar_set_is_accepted():
    fs = aggregate_arrays([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [1, 1, 1])
    assert np.linalg.matrix_rank(fs.M) == 2


def test_synthesize_identity_pose(landmarks):
    fs = landmarks()
    meas = synthesize_measurements(np.eye(3), np.zeros(3), fs)
    assert np.array_equal(meas.y, fs.points)


def test_synthesize_quarter_turn_example():
    fs = aggregate_arrays([[2, 0, 0], [0, 3, 0], [0, 0, 4]], [1, 1, 1])
    # body yawed +90 deg; R maps inertial vectors into the body frame
    R = exp_so3([0.0, 0.0, -math.pi / 2])
    meas = synthesize_measurements(R, [1.0, 0.0, 0.0], fs)
    assert np.allclose(meas.y[0], [0.0, -1.0, 0.0], atol=1e-15)
    for i in range(3):
        assert np.allclose(meas.y[i], R @ (fs.points[i] - [1.0, 0.0, 0.0]), atol=1e-15)


def test_synthesize_bias_and_seed_determinism(landmarks):
    fs = landmarks()
    bias = np.full((len(fs), 3), 0.1)
    clean = synthesize_measurements(np.eye(3), np.zeros(3), fs)
    biased = synthesize_measurements(np.eye(3), np.zeros(3), fs, bias=bias)
    assert np.allclose(biased.y - clean.y, 0.1, atol=1e-15)
    a = synthesize_measurements(np.eye(3), np.zeros(3), fs, noise_std=0.07, rng_seed=7)
    b = synthesize_measurements(np.eye(3), np.zeros(3), fs, noise_std=0.07, rng_seed=7)
    c = synthesize_measurements(np.eye(3), np.zeros(3), fs, noise_std=0.07, rng_seed=8)
    assert np.array_equal(a.y, b.y)
    assert not np.array_equal(a.y, c.y)


def test_noise_variance_matches_configured_std(rng):
    pts = rng.uniform(-10.0, 10.0, size=(34_000, 3))
    fs = aggregate_arrays(pts, np.ones(len(pts)))
    R = exp_so3([0.2, -0.4, 1.0])
    P = np.array([1.0, 2.0, -3.0])
    clean = synthesize_measurements(R, P, fs)
    noisy = synthesize_measurements(R, P, fs, noise_std=0.07, rng_seed=2024)
    res = (noisy.y - clean.y).ravel()
    assert res.size >= 100_000
    assert abs(res.var() - 0.0049) / 0.0049 < 0.05
    assert abs(res.mean()) < 5 * 0.07 / math.sqrt(res.size)


def test_innovations_vanish_at_exact_estimate(rot, rng, landmarks):
    for _ in range(50):
        fs = landmarks(6)
        R, P = rot(), rng.standard_normal(3) * 3
        meas = synthesize_measurements(R, P, fs)
        inn = observer_innovations(R, P, meas, fs)
        assert np.max(np.abs(inn.ups_o)) < 1e-12
        assert np.max(np.abs(inn.y_err_sum)) < 1e-12


def test_observer_innovations_match_ground_truth(rot, rng, landmarks):
    for _ in range(200):
        fs = landmarks()
        R, R_hat = rot(), rot()
        P, P_hat = rng.standard_normal(3) * 3, rng.standard_normal(3) * 3
        meas = synthesize_measurements(R, P, fs)
        inn = observer_innovations(R_hat, P_hat, meas, fs)
        R_t = R_hat.T @ R
        assert np.max(np.abs(inn.ups_o - upsilon(ground_truth_rm(R_t, fs)))) < 1e-12
        assert np.max(np.abs(measured_rm(R_hat, meas, fs) - R_t @ fs.M)) < 1e-12
        P_t = P_hat - R_t @ P
        expected = fs.s_total * P_t + fs.s_total * (R_t - np.eye(3)) @ fs.p_c
        assert np.max(np.abs(inn.y_err_sum - expected)) < 1e-12
        # the residual determines the position error exactly
        rec = position_error_from_innovation(inn.y_err_sum, R_t, fs)
        assert np.max(np.abs(rec - P_t)) < 1e-12


def test_controller_innovation_examples(rot, rng, landmarks):
    fs = landmarks()
    R = rot()
    meas = synthesize_measurements(R, rng.standard_normal(3), fs)
    assert np.max(np.abs(controller_innovation(R, meas, fs))) < 1e-12
    for _ in range(200):
        fs = landmarks()
        R, R_d = rot(), rot()
        meas = synthesize_measurements(R, rng.standard_normal(3) * 3, fs)
        ups = controller_innovation(R_d, meas, fs)
        assert np.max(np.abs(ups - upsilon(R_d.T @ R @ fs.M))) < 1e-12


@pytest.mark.parametrize("theta", [0.1, 0.7, 2.0, -1.3])
def test_yaw_misalignment_gives_vertical_innovation(theta):
    c = 1.7
    pts = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, c], [0, 0, -c]]
    fs = aggregate_arrays(pts, np.ones(6))
    assert np.allclose(fs.M, np.diag([2.0, 2.0, 2.0 * c * c]))
    R = exp_so3([0.3, -0.2, 0.5])
    R_d = R @ exp_so3([0.0, 0.0, theta]).T
    meas = synthesize_measurements(R, [0.5, 0.1, -2.0], fs)
    ups = controller_innovation(R_d, meas, fs)
    assert np.max(np.abs(ups[:2])) < 1e-12
    assert abs(ups[2]) > 1e-3
    assert ups[2] == pytest.approx(2.0 * math.sin(theta), abs=1e-12)


def test_size_mismatch_is_rejected(landmarks):
    fs = landmarks(5)
    meas = synthesize_measurements(np.eye(3), np.zeros(3), landmarks(4))
    with pytest.raises(ValueError):
        observer_innovations(np.eye(3), np.zeros(3), meas, fs)
    with pytest.raises(ValueError):
        controller_innovation(np.eye(3), meas, fs)


@settings(max_examples=50, deadline=None)
@given(rotations(), rotations(), vec3, vec3, st.floats(0.05, 20.0))
def test_prop_weight_scale_covariance(R, R_hat, P, P_hat, c):
    rng = np.random.default_rng(3)
    fs = aggregate_arrays(rng.uniform(-3.0, 3.0, size=(5, 3)), rng.uniform(0.5, 2.0, size=5))
    fc = fs.scaled(c)
    assert fc.s_total == pytest.approx(c * fs.s_total, rel=1e-13)
    assert np.allclose(fc.p_c, fs.p_c, atol=1e-12)
    assert np.allclose(fc.M, c * fs.M, atol=1e-10)
    meas = synthesize_measurements(R, P, fs)
    a = observer_innovations(R_hat, P_hat, meas, fs)
    b = observer_innovations(R_hat, P_hat, meas, fc)
    assert np.allclose(b.ups_o, c * a.ups_o, atol=1e-9)
    assert np.allclose(b.y_err_sum, c * a.y_err_sum, atol=1e-9)
