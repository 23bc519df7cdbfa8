"""Unit-quaternion form of the observer and control laws.

Quaternions are ``[q0, q1, q2, q3]`` arrays (scalar first). The attitude
matrix is ``quat_to_rot(Q)``, the inertial-to-body rotation, so that the
right product ``Q (x) [0, w]`` drives ``Rdot = -hat(w) R`` and the left
product ``[0, w] (x) Q`` drives ``Rdot = R hat(w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controller import ControlCommand, ControllerGains, torque_law
from .guidance import GuidanceOutput
from .liegroup import (
    E3,
    NavState,
    PreconditionError,
    TangentInput,
    exp_se23,
    hat,
    quat_to_rot,
    upsilon,
)
from .measurement import BodyMeasurements, FeatureSet, Innovations, measured_rm
from .observer import CorrectionFactors, EstimatorState, ObserverGains, correction_factors

NORM_TOL = 1e-12


def quat_mul(p, q) -> np.ndarray:
    p0, pv = p[0], np.asarray(p[1:], dtype=float)
    q0, qv = q[0], np.asarray(q[1:], dtype=float)
    return np.concatenate(([p0 * q0 - pv @ qv], p0 * qv + q0 * pv + np.cross(pv, qv)))


def quat_exp(v) -> np.ndarray:
    """``exp([0, v])`` for a rotation vector-like ``v`` (half angles already applied)."""
    v = np.asarray(v, dtype=float)
    a = math.sqrt(float(v @ v))
    if a < 1e-8:
        s = 1.0 - a * a / 6.0
    else:
        s = math.sin(a) / a
    return np.concatenate(([math.cos(a)], s * v))


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def rot_to_quat(R) -> np.ndarray:
    """Inverse of :func:`quat_to_rot` with ``q0 >= 0``."""
    R = np.asarray(R, dtype=float)
    # quat_to_rot returns the transpose of the usual body-to-inertial form
    A = R.T
    tr = float(np.trace(A))
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = np.array([0.25 * s, (A[2, 1] - A[1, 2]) / s, (A[0, 2] - A[2, 0]) / s, (A[1, 0] - A[0, 1]) / s])
    elif A[0, 0] > A[1, 1] and A[0, 0] > A[2, 2]:
        s = 2.0 * math.sqrt(1.0 + A[0, 0] - A[1, 1] - A[2, 2])
        q = np.array([(A[2, 1] - A[1, 2]) / s, 0.25 * s, (A[0, 1] + A[1, 0]) / s, (A[0, 2] + A[2, 0]) / s])
    elif A[1, 1] > A[2, 2]:
        s = 2.0 * math.sqrt(1.0 + A[1, 1] - A[0, 0] - A[2, 2])
        q = np.array([(A[0, 2] - A[2, 0]) / s, (A[0, 1] + A[1, 0]) / s, 0.25 * s, (A[1, 2] + A[2, 1]) / s])
    else:
        s = 2.0 * math.sqrt(1.0 + A[2, 2] - A[0, 0] - A[1, 1])
        q = np.array([(A[1, 0] - A[0, 1]) / s, (A[0, 2] + A[2, 0]) / s, (A[1, 2] + A[2, 1]) / s, 0.25 * s])
    if q[0] < 0.0:
        q = -q
    return quat_normalize(q)


def rate_matrix_right(omega) -> np.ndarray:
    """``Y``: ``Y Q = Q (x) [0, omega]``."""
    w = np.asarray(omega, dtype=float)
    Y = np.zeros((4, 4))
    Y[0, 1:] = -w
    Y[1:, 0] = w
    Y[1:, 1:] = -hat(w)
    return Y


def rate_matrix_left(omega) -> np.ndarray:
    """``Z``: ``Z Q = [0, omega] (x) Q``."""
    w = np.asarray(omega, dtype=float)
    Z = np.zeros((4, 4))
    Z[0, 1:] = -w
    Z[1:, 0] = w
    Z[1:, 1:] = hat(w)
    return Z


@dataclass(frozen=True)
class QuatEstimatorState:
    Q_hat: np.ndarray
    P_hat: np.ndarray
    V_hat: np.ndarray
    b_hat: np.ndarray

    @classmethod
    def from_estimator(cls, est: EstimatorState) -> "QuatEstimatorState":
        return cls(rot_to_quat(est.R_hat), est.P_hat, est.V_hat, est.b_hat.copy())

    @property
    def R_hat(self) -> np.ndarray:
        return quat_to_rot(self.Q_hat)

    def to_estimator(self) -> EstimatorState:
        return EstimatorState(NavState.from_parts(self.R_hat, self.P_hat, self.V_hat), self.b_hat)


def quat_innovations(R_q, P_hat, meas: BodyMeasurements, fs: FeatureSet) -> Innovations:
    """Innovations assembled as ``vex(Pa(sum s_i R^T y_i (p_i - p_c)^T))``."""
    ups = upsilon(measured_rm(R_q, meas, fs))
    ry = meas.y @ R_q
    y_err = fs.weights @ (np.asarray(P_hat, dtype=float) + ry - fs.points)
    return Innovations(ups, y_err)


def quat_rate(st: QuatEstimatorState, omega_m, w: CorrectionFactors) -> np.ndarray:
    """``Qdot = (Y - Z) Q / 2`` with ``Y`` from ``omega_m - b_hat`` and ``Z`` from ``w_omega``."""
    omega_hat = np.asarray(omega_m, dtype=float) - st.b_hat
    return 0.5 * (rate_matrix_right(omega_hat) - rate_matrix_left(w.w_omega)) @ st.Q_hat


@dataclass(frozen=True)
class QuatStepResult:
    state: QuatEstimatorState
    innovations: Innovations
    corrections: CorrectionFactors


def quat_predict(st: QuatEstimatorState, omega_m, thrust: float, m: float, dt: float) -> QuatEstimatorState:
    """Right-multiplied flow ``Q (x) exp(omega_hat dt / 2)`` with the matching translational part.

    The returned position still carries the ``dt * V_hat`` shift that the
    correction removes (the 5x5 form keeps it in row 5 until then).
    """
    if not dt > 0.0:
        raise PreconditionError("quaternion observer step requires dt > 0")
    omega_hat = np.asarray(omega_m, dtype=float) - st.b_hat
    Eu = exp_se23(TangentInput(omega_hat, np.zeros(3), -(thrust / m) * E3, 1.0), dt)
    Rt = st.R_hat.T
    Q = quat_mul(st.Q_hat, quat_exp(0.5 * dt * omega_hat))
    P = Rt @ Eu[:3, 3] + st.P_hat + dt * st.V_hat
    V = Rt @ Eu[:3, 4] + st.V_hat
    return QuatEstimatorState(Q, P, V, st.b_hat)


def quat_correct(st: QuatEstimatorState, w: CorrectionFactors, dt: float) -> QuatEstimatorState:
    """Left-multiplied flow ``exp(-w_omega dt / 2) (x) Q`` plus the translational correction."""
    Ew = exp_se23(w.as_input().scaled(-1.0), dt)
    Q = quat_normalize(quat_mul(quat_exp(-0.5 * dt * w.w_omega), st.Q_hat))
    # the -dt entry of Ew in row 5 cancels the shift left by the prediction
    P = Ew[:3, :3] @ st.P_hat + Ew[:3, 3] + dt * Ew[:3, 4]
    V = Ew[:3, :3] @ st.V_hat + Ew[:3, 4]
    return QuatEstimatorState(Q, P, V, st.b_hat)


def quat_bias_update(st: QuatEstimatorState, ups_o, gains: ObserverGains, dt: float) -> QuatEstimatorState:
    b = st.b_hat + dt * gains.gamma_o * st.R_hat @ ups_o
    return QuatEstimatorState(st.Q_hat, st.P_hat, st.V_hat, b)


def quat_observer_step_detailed(
    st: QuatEstimatorState,
    meas: BodyMeasurements,
    fs: FeatureSet,
    thrust: float,
    m: float,
    g: float,
    gains: ObserverGains,
    dt: float,
) -> QuatStepResult:
    inn = quat_innovations(st.R_hat, st.P_hat, meas, fs)
    w = correction_factors(inn, fs, gains, g)
    # left and right rates commute, so the held-rate flow factors exactly
    pred = quat_predict(st, meas.omega_m, thrust, m, dt)
    corr = quat_correct(pred, w, dt)
    return QuatStepResult(quat_bias_update(corr, inn.ups_o, gains, dt), inn, w)


def quat_observer_step(
    st: QuatEstimatorState,
    meas: BodyMeasurements,
    fs: FeatureSet,
    thrust: float,
    m: float,
    g: float,
    gains: ObserverGains,
    dt: float,
) -> QuatEstimatorState:
    return quat_observer_step_detailed(st, meas, fs, thrust, m, g, gains, dt).state


def quat_control_laws(
    meas: BodyMeasurements,
    fs: FeatureSet,
    st: QuatEstimatorState,
    guid: GuidanceOutput,
    gains: ControllerGains,
) -> ControlCommand:
    R_d = quat_to_rot(guid.Q_d)
    ups_c = upsilon(R_d.T @ measured_rm(np.eye(3), meas, fs))
    torque = torque_law(
        ups_c, R_d, guid.Omega_d, guid.Omega_d_dot, meas.omega_m, st.b_hat, gains
    )
    return ControlCommand(torque, float(guid.thrust))
