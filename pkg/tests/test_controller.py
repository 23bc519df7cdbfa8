import ast
import inspect
from pathlib import Path

import numpy as np
import pytest

import vtolnav.controller as controller_mod
from vtolnav.controller import ControlCommand, ControllerGains, control_step, torque_law
from vtolnav.guidance import GuidanceGains, ThetaState, desired_rates, extract_attitude, intermediary_F
from vtolnav.guidance import hover_trajectory
from vtolnav.liegroup import hat, upsilon
from vtolnav.measurement import controller_innovation, synthesize_measurements
from vtolnav.observer import EstimatorState

J = np.diag([0.15, 0.23, 0.16])


def _torque_reference(ups_c, R_d, Om_d, Om_d_dot, omega_m, b_hat, k1, k2, J):
    om = omega_m - b_hat
    w_c = k1 * R_d @ ups_c + k2 * (Om_d - omega_m + b_hat)
    return w_c + J @ Om_d_dot - np.cross(J @ om, Om_d)


def test_gain_validation():
    with pytest.raises(ValueError):
        ControllerGains(k_c1=0.0)
    with pytest.raises(ValueError):
        ControllerGains(J=np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        ControllerGains(J=np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))


def test_torque_zero_inputs():
    z = np.zeros(3)
    assert np.array_equal(torque_law(z, np.eye(3), z, z, z, z, ControllerGains()), z)


def test_torque_reduces_to_gyroscopic_feedforward(rot, rng):
    gains = ControllerGains()
    for _ in range(20):
        Om_d = rng.standard_normal(3)
        b = rng.standard_normal(3) * 0.1
        tau = torque_law(np.zeros(3), rot(), Om_d, np.zeros(3), Om_d + b, b, gains)
        assert np.allclose(tau, -hat(J @ Om_d) @ Om_d, atol=1e-13)


def test_torque_matches_line_by_line(rot, rng):
    gains = ControllerGains()
    for _ in range(200):
        args = (rng.standard_normal(3), rot(), rng.standard_normal(3), rng.standard_normal(3),
                rng.standard_normal(3), rng.standard_normal(3) * 0.2)
        got = torque_law(*args, gains)
        exp = _torque_reference(*args, 1.0, 4.0, J)
        assert np.allclose(got, exp, atol=1e-13, rtol=0)


def _hover_guidance(m, g):
    traj = hover_trajectory([1.0, 2.0, 3.0])(0.0)
    F, Fd, Fdd = intermediary_F(traj, ThetaState.zero(), np.zeros(3), np.zeros(3), GuidanceGains())
    thrust, Q, R = extract_attitude(F, m, g)
    return traj, desired_rates(F, Fd, Fdd, thrust, Q, R, g)


def test_hover_equilibrium_command(landmarks):
    gains = ControllerGains()
    fs = landmarks()
    b = np.array([0.1, -0.1, 0.05])
    traj, guid = _hover_guidance(gains.m, gains.g)
    meas = synthesize_measurements(np.eye(3), traj.P_d, fs, omega_m=b)
    est = EstimatorState.initial(np.eye(3), traj.P_d, np.zeros(3), b)
    cmd = control_step(meas, fs, est, guid, gains)
    assert cmd.thrust == pytest.approx(gains.m * gains.g, abs=1e-12)
    assert np.max(np.abs(cmd.torque)) < 1e-12


def test_control_step_uses_measured_innovation(rot, rng, landmarks):
    gains = ControllerGains()
    for _ in range(50):
        fs = landmarks()
        R = rot()
        F = rng.standard_normal(3) * 2
        thrust, Q, R_d = extract_attitude(F, gains.m, gains.g)
        guid = desired_rates(F, rng.standard_normal(3), rng.standard_normal(3), thrust, Q, R_d, gains.g)
        meas = synthesize_measurements(R, rng.standard_normal(3), fs, omega_m=rng.standard_normal(3))
        est = EstimatorState.initial(b_hat=rng.standard_normal(3) * 0.1)
        cmd = control_step(meas, fs, est, guid, gains)
        ups = controller_innovation(R_d, meas, fs)
        assert np.max(np.abs(ups - upsilon(R_d.T @ R @ fs.M))) < 1e-12
        expected = torque_law(ups, R_d, guid.Omega_d, guid.Omega_d_dot, meas.omega_m, est.b_hat, gains)
        assert np.array_equal(cmd.torque, expected)
        assert cmd.thrust == guid.thrust
        assert np.all(np.isfinite(cmd.torque))


def test_controller_has_no_truth_inputs():
    banned = {"R", "P", "V", "Omega", "truth", "plant", "state"}
    for fn in (torque_law, control_step):
        params = set(inspect.signature(fn).parameters)
        assert not params & banned, params & banned
    src = Path(controller_mod.__file__).read_text()
    imported = {
        node.module for node in ast.walk(ast.parse(src)) if isinstance(node, ast.ImportFrom) and node.module
    }
    assert "plant" not in imported
    assert all("plant" not in name for name in imported)


def test_command_type():
    cmd = ControlCommand(np.zeros(3), 29.43)
    assert cmd.thrust == 29.43
