import math

import numpy as np
import pytest

from vtolnav.controller import ControlCommand
from vtolnav.liegroup import E3, exp_so3, orthonormality_drift
from vtolnav.plant import (
    PlantParams,
    PlantState,
    attitude_step,
    gyro_output,
    plant_derivatives,
    plant_step,
    plant_step_euler,
)

P = PlantParams()


def _state(R=None, Omega=(0.0, 0.0, 0.0), Pos=(0.0, 0.0, 0.0), V=(0.0, 0.0, 0.0)):
    return PlantState(np.eye(3) if R is None else R, np.array(Omega, dtype=float), np.array(Pos, dtype=float), np.array(V, dtype=float))


def test_param_validation():
    with pytest.raises(ValueError):
        PlantParams(m=0.0)
    with pytest.raises(ValueError):
        PlantParams(J=np.diag([1.0, 0.0, 1.0]))


def test_derivatives_hover_and_free_fall():
    d = plant_derivatives(_state(), ControlCommand(np.zeros(3), P.m * P.g), P)
    assert np.array_equal(d.R_dot, np.zeros((3, 3)))
    assert np.array_equal(d.Omega_dot, np.zeros(3))
    assert np.allclose(d.V_dot, 0.0, atol=1e-15)
    d = plant_derivatives(_state(V=(1.0, 2.0, 3.0)), ControlCommand(np.zeros(3), 0.0), P)
    assert np.array_equal(d.V_dot, P.g * E3)
    assert np.array_equal(d.P_dot, [1.0, 2.0, 3.0])


def test_derivatives_attitude_sign(rot):
    R = rot()
    Om = np.array([0.3, -0.2, 0.7])
    d = plant_derivatives(_state(R, Om), ControlCommand(np.zeros(3), 0.0), P)
    h = 1e-6
    fd = (attitude_step(R, Om, h) - attitude_step(R, Om, -h)) / (2 * h)
    assert np.allclose(d.R_dot, fd, atol=1e-9)


def test_torque_free_energy_identity(rng):
    J = np.asarray(P.J)
    for _ in range(50):
        Om = rng.standard_normal(3) * 3
        d = plant_derivatives(_state(Omega=Om), ControlCommand(np.zeros(3), 0.0), P)
        assert abs(Om @ J @ d.Omega_dot) < 1e-12


def test_torque_free_spin_conserves_energy_and_momentum():
    J = np.asarray(P.J)
    s = _state(Omega=(1.5, -2.0, 3.0))
    e0 = 0.5 * s.Omega @ J @ s.Omega
    h0 = np.linalg.norm(J @ s.Omega)
    cmd = ControlCommand(np.zeros(3), 0.0)
    for _ in range(5000):
        s = plant_step(s, cmd, P, 1e-3)
    assert abs(0.5 * s.Omega @ J @ s.Omega - e0) / e0 < 1e-10
    assert abs(np.linalg.norm(J @ s.Omega) - h0) / h0 < 1e-10


def _omega_after(dt, T=1.0):
    s = _state(Omega=(2.0, -3.0, 4.0))
    cmd = ControlCommand(np.array([0.3, 0.1, -0.2]), 0.0)
    for _ in range(int(round(T / dt))):
        s = plant_step(s, cmd, P, dt)
    return s.Omega


def test_omega_channel_convergence_order():
    ref = _omega_after(1e-3)
    errs = [np.linalg.norm(_omega_after(dt) - ref) for dt in (0.04, 0.02, 0.01)]
    for a, b in zip(errs, errs[1:]):
        assert a / b >= 3.8


def test_hover_is_stationary():
    s0 = _state(Pos=(1.0, 2.0, 3.0))
    s = s0
    cmd = ControlCommand(np.zeros(3), P.m * P.g)
    for _ in range(1000):
        s = plant_step(s, cmd, P, 1e-3)
    for a, b in ((s.R, s0.R), (s.Omega, s0.Omega), (s.P, s0.P), (s.V, s0.V)):
        assert np.max(np.abs(a - b)) < 1e-12


def test_group_step_vs_euler_is_second_order(rot):
    s = _state(rot(), (0.4, -0.5, 0.9), (1.0, -2.0, 0.5), (0.3, 0.2, -1.0))
    cmd = ControlCommand(np.array([0.2, -0.1, 0.05]), 25.0)

    def gap(dt):
        a, b = plant_step(s, cmd, P, dt), plant_step_euler(s, cmd, P, dt)
        return max(np.max(np.abs(a.R - b.R)), np.max(np.abs(a.Omega - b.Omega)),
                   np.max(np.abs(a.P - b.P)), np.max(np.abs(a.V - b.V)))

    g = [gap(dt) for dt in (1e-3, 5e-4, 2.5e-4)]
    for a, b in zip(g, g[1:]):
        assert 3.6 < a / b < 4.4


def test_attitude_drift_over_long_run():
    s = _state(exp_so3([0.2, 0.1, -0.3]), (0.8, -1.1, 1.7))
    cmd = ControlCommand(np.array([0.01, -0.02, 0.015]), P.m * P.g)
    for _ in range(50_000):
        s = plant_step(s, cmd, P, 1e-3)
    assert orthonormality_drift(s.R) < 1e-9
    assert abs(np.linalg.det(s.R) - 1.0) < 1e-9


def test_step_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        plant_step(_state(), ControlCommand(np.zeros(3), 0.0), P, 0.0)


def test_gyro_examples():
    Om = np.array([0.3, -0.2, 0.1])
    zero_bias = PlantParams(b_omega_true=np.zeros(3))
    assert np.array_equal(gyro_output(_state(Omega=Om), zero_bias), Om)
    assert np.array_equal(gyro_output(_state(), P), [0.1, -0.1, 0.05])
    a = gyro_output(_state(Omega=Om), P, 0.01, seed=5)
    b = gyro_output(_state(Omega=Om), P, 0.01, seed=5)
    assert np.array_equal(a, b)


def test_gyro_noise_statistics():
    rng = np.random.default_rng(99)
    s = _state(Omega=(0.3, -0.2, 0.1))
    sigma = 0.05
    N = 100_000
    draws = np.array([gyro_output(s, P, sigma, rng=rng) for _ in range(N)])
    mean = draws.mean(axis=0)
    assert np.all(np.abs(mean - (s.Omega + P.b_omega_true)) < 3 * sigma / math.sqrt(N))
    assert np.allclose(draws.std(axis=0), sigma, rtol=0.02)
