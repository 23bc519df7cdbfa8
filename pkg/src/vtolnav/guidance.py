"""Reference trajectory, auxiliary-variable adaptation and desired-attitude extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .liegroup import E3, quat_to_rot


class SingularThrustDirection(ValueError):
    """The intermediary input points along +e3 with magnitude >= g."""


ALPHA_MIN = 1e-9


@dataclass(frozen=True)
class TrajectorySample:
    P_d: np.ndarray
    V_d: np.ndarray
    P_d_dd: np.ndarray
    P_d_3: np.ndarray
    P_d_4: np.ndarray

    def derivative(self, order: int) -> np.ndarray:
        return (self.P_d, self.V_d, self.P_d_dd, self.P_d_3, self.P_d_4)[order]


TrajectoryFn = Callable[[float], TrajectorySample]


def reference_trajectory(t: float) -> TrajectorySample:
    """``P_d = [6 cos(0.19 t), 3 sin(0.4 t), 3.5 + 0.15 t]`` and its derivatives."""
    a, b = 0.19, 0.4
    ca, sa = math.cos(a * t), math.sin(a * t)
    cb, sb = math.cos(b * t), math.sin(b * t)
    return TrajectorySample(
        P_d=np.array([6.0 * ca, 3.0 * sb, 3.5 + 0.15 * t]),
        V_d=np.array([-6.0 * a * sa, 3.0 * b * cb, 0.15]),
        P_d_dd=np.array([-6.0 * a**2 * ca, -3.0 * b**2 * sb, 0.0]),
        P_d_3=np.array([6.0 * a**3 * sa, -3.0 * b**3 * cb, 0.0]),
        P_d_4=np.array([6.0 * a**4 * ca, 3.0 * b**4 * sb, 0.0]),
    )


def hover_trajectory(point) -> TrajectoryFn:
    p = np.array(point, dtype=float)
    z = np.zeros(3)

    def traj(t: float) -> TrajectorySample:
        return TrajectorySample(p.copy(), z, z, z, z)

    return traj


def check_trajectory_derivatives(
    traj: TrajectoryFn, times=(0.0, 1.0, 10.0, 50.0), h: float = 1e-4, tol: float = 1e-6
) -> float:
    """Largest central-difference mismatch over derivative orders 1..4.

    Raises ``ValueError`` if it exceeds ``tol`` (relative to the derivative scale).
    """
    worst = 0.0
    for t in times:
        s0 = traj(t)
        sp, sm = traj(t + h), traj(t - h)
        for k in range(1, 5):
            fd = (sp.derivative(k - 1) - sm.derivative(k - 1)) / (2.0 * h)
            scale = max(1.0, float(np.max(np.abs(s0.derivative(k)))))
            worst = max(worst, float(np.max(np.abs(fd - s0.derivative(k)))) / scale)
    if worst > tol:
        raise ValueError(f"trajectory derivatives inconsistent (max error {worst:.3g})")
    return worst


@dataclass(frozen=True)
class ThetaState:
    theta: np.ndarray
    theta_dot: np.ndarray

    @classmethod
    def zero(cls) -> "ThetaState":
        return cls(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class GuidanceGains:
    k_theta1: float = 1.2
    k_theta2: float = 1.2
    k_c3: float = 4.0
    k_c4: float = 2.0

    def __post_init__(self):
        for name in ("k_theta1", "k_theta2", "k_c3", "k_c4"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


def theta_accel(st: ThetaState, P_hat, V_hat, traj: TrajectorySample, gains: GuidanceGains):
    return (
        -gains.k_theta1 * np.tanh(st.theta)
        - gains.k_theta2 * np.tanh(st.theta_dot)
        + gains.k_c3 * (np.asarray(P_hat) - traj.P_d - st.theta)
        + gains.k_c4 * (np.asarray(V_hat) - traj.V_d - st.theta_dot)
    )


def theta_step(
    st: ThetaState, P_hat, V_hat, traj: TrajectorySample, gains: GuidanceGains, dt: float
) -> tuple[ThetaState, np.ndarray]:
    """Semi-implicit Euler: velocity first, then position with the new velocity."""
    if not dt > 0.0:
        raise ValueError("theta_step requires dt > 0")
    dd = theta_accel(st, P_hat, V_hat, traj, gains)
    theta_dot = st.theta_dot + dt * dd
    theta = st.theta + dt * theta_dot
    return ThetaState(theta, theta_dot), dd


def theta_jerk(
    st: ThetaState,
    theta_ddot,
    P_hat_dot,
    V_hat_dot,
    traj: TrajectorySample,
    gains: GuidanceGains,
) -> np.ndarray:
    """Time derivative of the adaptation law, with the estimator rates supplied."""
    th, thd = st.theta, st.theta_dot
    H = 1.0 - np.tanh(th) ** 2
    Hd = 1.0 - np.tanh(thd) ** 2
    return (
        -gains.k_theta1 * H * thd
        - gains.k_theta2 * Hd * theta_ddot
        + gains.k_c3 * (np.asarray(P_hat_dot) - traj.V_d - thd)
        + gains.k_c4 * (np.asarray(V_hat_dot) - traj.P_d_dd - theta_ddot)
    )


def intermediary_force(traj: TrajectorySample, st: ThetaState, gains: GuidanceGains) -> np.ndarray:
    """``F`` alone; it needs no higher derivatives of theta."""
    return traj.P_d_dd - gains.k_theta1 * np.tanh(st.theta) - gains.k_theta2 * np.tanh(st.theta_dot)


def intermediary_F(
    traj: TrajectorySample,
    st: ThetaState,
    theta_ddot,
    theta_3,
    gains: GuidanceGains,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    th, thd = st.theta, st.theta_dot
    thdd = np.asarray(theta_ddot, dtype=float)
    th3 = np.asarray(theta_3, dtype=float)
    t1, t2 = np.tanh(th), np.tanh(thd)
    h1, h2 = 1.0 - t1**2, 1.0 - t2**2
    F = traj.P_d_dd - gains.k_theta1 * t1 - gains.k_theta2 * t2
    F_dot = traj.P_d_3 - gains.k_theta1 * h1 * thd - gains.k_theta2 * h2 * thdd
    z = h1 * (thdd - 2.0 * t1 * thd**2)
    z_dot = h2 * (th3 - 2.0 * t2 * thdd**2)
    F_ddot = traj.P_d_4 - gains.k_theta1 * z - gains.k_theta2 * z_dot
    return F, F_dot, F_ddot


def _alphas(F, g: float) -> tuple[float, float]:
    F = np.asarray(F, dtype=float)
    a1 = float(np.linalg.norm(g * E3 - F))
    a2 = a1 + g - float(F[2])
    if a2 < ALPHA_MIN or a1 < ALPHA_MIN:
        raise SingularThrustDirection(
            f"F={F.tolist()} is on the excluded set [0, 0, c], c >= g"
        )
    return a1, a2


def extract_attitude(F, m: float, g: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Thrust magnitude, desired quaternion ``[q0, q1, q2, 0]`` and rotation."""
    F = np.asarray(F, dtype=float)
    a1, _ = _alphas(F, g)
    thrust = m * a1
    q0 = math.sqrt(max(m * (g - F[2]) / (2.0 * thrust) + 0.5, 0.0))
    if q0 < math.sqrt(ALPHA_MIN):
        raise SingularThrustDirection(f"F={F.tolist()} gives a degenerate attitude")
    k = m / (2.0 * thrust * q0)
    Q = np.array([q0, k * F[1], -k * F[0], 0.0])
    return thrust, Q, quat_to_rot(Q)


def xi_matrix(F, g: float) -> np.ndarray:
    f1, f2, _ = (float(x) for x in F)
    a1, a2 = _alphas(F, g)
    return np.array(
        [
            [-f1 * f2, -f2 * f2 + a1 * a2, f2 * a2],
            [f1 * f1 - a1 * a2, f1 * f2, -f1 * a2],
            [f2 * a1, -f1 * a1, 0.0],
        ]
    ) / (a1 * a1 * a2)


def xi_dot(F, F_dot, g: float) -> np.ndarray:
    """Time derivative of :func:`xi_matrix` along ``F(t)``."""
    f1, f2, f3 = (float(x) for x in F)
    d1, d2, d3 = (float(x) for x in F_dot)
    a1, a2 = _alphas(F, g)
    a1d = (f1 * d1 + f2 * d2 + (f3 - g) * d3) / a1
    a2d = a1d - d3
    N = np.array(
        [
            [-f1 * f2, -f2 * f2 + a1 * a2, f2 * a2],
            [f1 * f1 - a1 * a2, f1 * f2, -f1 * a2],
            [f2 * a1, -f1 * a1, 0.0],
        ]
    )
    a12d = a1d * a2 + a1 * a2d
    Nd = np.array(
        [
            [-(d1 * f2 + f1 * d2), -2.0 * f2 * d2 + a12d, d2 * a2 + f2 * a2d],
            [2.0 * f1 * d1 - a12d, d1 * f2 + f1 * d2, -(d1 * a2 + f1 * a2d)],
            [d2 * a1 + f2 * a1d, -(d1 * a1 + f1 * a1d), 0.0],
        ]
    )
    den = a1 * a1 * a2
    den_d = 2.0 * a1 * a1d * a2 + a1 * a1 * a2d
    return Nd / den - N * den_d / (den * den)


def omega_d(F, F_dot, g: float) -> np.ndarray:
    return xi_matrix(F, g) @ np.asarray(F_dot, dtype=float)


def omega_d_dot(F, F_dot, F_ddot, g: float) -> np.ndarray:
    return xi_dot(F, F_dot, g) @ np.asarray(F_dot, dtype=float) + xi_matrix(F, g) @ np.asarray(
        F_ddot, dtype=float
    )


@dataclass(frozen=True)
class GuidanceOutput:
    F: np.ndarray
    F_dot: np.ndarray
    F_ddot: np.ndarray
    thrust: float
    Q_d: np.ndarray
    R_d: np.ndarray
    Omega_d: np.ndarray
    Omega_d_dot: np.ndarray


def desired_rates(
    F, F_dot, F_ddot, thrust: float, Q_d, R_d, g: float
) -> GuidanceOutput:
    return GuidanceOutput(
        F=np.asarray(F, dtype=float),
        F_dot=np.asarray(F_dot, dtype=float),
        F_ddot=np.asarray(F_ddot, dtype=float),
        thrust=thrust,
        Q_d=Q_d,
        R_d=R_d,
        Omega_d=omega_d(F, F_dot, g),
        Omega_d_dot=omega_d_dot(F, F_dot, F_ddot, g),
    )
