"""Torque and thrust laws driven by landmark measurements and estimator outputs.

Nothing here accepts plant ground truth: inputs are the body-frame landmark
vectors, the gyro reading, estimator outputs and guidance quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .guidance import GuidanceOutput
from .liegroup import hat
from .measurement import BodyMeasurements, FeatureSet, controller_innovation
from .observer import EstimatorState


def _default_inertia() -> np.ndarray:
    return np.diag([0.15, 0.23, 0.16])


@dataclass(frozen=True)
class ControllerGains:
    k_c1: float = 1.0
    k_c2: float = 4.0
    J: np.ndarray = field(default_factory=_default_inertia)
    m: float = 3.0
    g: float = 9.81

    def __post_init__(self):
        for name in ("k_c1", "k_c2", "m"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        J = np.asarray(self.J, dtype=float)
        if J.shape != (3, 3) or not np.allclose(J, J.T):
            raise ValueError("J must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(J)[0] <= 0.0:
            raise ValueError("J must be positive definite")


@dataclass(frozen=True)
class ControlCommand:
    torque: np.ndarray
    thrust: float


def torque_law(
    ups_c,
    R_d,
    Omega_d,
    Omega_d_dot,
    omega_m,
    b_hat,
    gains: ControllerGains,
) -> np.ndarray:
    omega_hat = np.asarray(omega_m, dtype=float) - np.asarray(b_hat, dtype=float)
    Omega_d = np.asarray(Omega_d, dtype=float)
    w_c = gains.k_c1 * np.asarray(R_d) @ np.asarray(ups_c) + gains.k_c2 * (Omega_d - omega_hat)
    J = np.asarray(gains.J)
    return w_c + J @ np.asarray(Omega_d_dot) - hat(J @ omega_hat) @ Omega_d


def control_step(
    meas: BodyMeasurements,
    fs: FeatureSet,
    est: EstimatorState,
    guid: GuidanceOutput,
    gains: ControllerGains,
) -> ControlCommand:
    ups_c = controller_innovation(guid.R_d, meas, fs)
    torque = torque_law(
        ups_c, guid.R_d, guid.Omega_d, guid.Omega_d_dot, meas.omega_m, est.b_hat, gains
    )
    return ControlCommand(torque, float(guid.thrust))
