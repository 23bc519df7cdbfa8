"""Direct nonlinear observer on SE_2(3) with gyro-bias estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .liegroup import (
    E3,
    NavState,
    PreconditionError,
    TangentInput,
    attitude_distance,
    exp_se23,
    hat,
    nav_compose,
    nav_inverse,
)
from .measurement import (
    BodyMeasurements,
    FeatureSet,
    Innovations,
    observer_innovations,
)


@dataclass(frozen=True)
class ObserverGains:
    gamma_o: float = 0.7
    k_o1: float = 11.0
    k_o2: float = 10.0
    k_o3: float = 4.0

    def __post_init__(self):
        for name in ("gamma_o", "k_o1", "k_o2", "k_o3"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class EstimatorState:
    X_hat: NavState
    b_hat: np.ndarray

    @classmethod
    def initial(cls, R_hat=None, P_hat=None, V_hat=None, b_hat=None) -> "EstimatorState":
        z = np.zeros(3)
        return cls(
            NavState.from_parts(
                np.eye(3) if R_hat is None else R_hat,
                z if P_hat is None else P_hat,
                z if V_hat is None else V_hat,
            ),
            np.array(z if b_hat is None else b_hat, dtype=float),
        )

    @property
    def R_hat(self) -> np.ndarray:
        return self.X_hat.R

    @property
    def P_hat(self) -> np.ndarray:
        return self.X_hat.P

    @property
    def V_hat(self) -> np.ndarray:
        return self.X_hat.V


@dataclass(frozen=True)
class CorrectionFactors:
    w_omega: np.ndarray
    w_v: np.ndarray
    w_a: np.ndarray

    def as_input(self) -> TangentInput:
        return TangentInput(self.w_omega, self.w_v, self.w_a, 1.0)


@dataclass(frozen=True)
class ObserverDerivatives:
    R_hat_dot: np.ndarray
    b_hat_dot: np.ndarray
    P_hat_dot: np.ndarray
    V_hat_dot: np.ndarray


def correction_factors(
    inn: Innovations, fs: FeatureSet, gains: ObserverGains, g: float
) -> CorrectionFactors:
    w_omega = gains.k_o1 * inn.ups_o
    ye = inn.y_err_sum
    w_v = gains.k_o2 * ye - hat(w_omega) @ (ye + fs.s_total * fs.p_c) / fs.s_total
    w_a = -g * E3 + gains.k_o3 * ye
    return CorrectionFactors(w_omega, w_v, w_a)


def observer_derivatives(
    est: EstimatorState,
    omega_m,
    thrust: float,
    m: float,
    w: CorrectionFactors,
    inn: Innovations,
    gains: ObserverGains,
) -> ObserverDerivatives:
    """Continuous-time right-hand sides of the estimator."""
    R_hat = est.R_hat
    Ww = hat(w.w_omega)
    P_hat, V_hat = est.P_hat, est.V_hat
    return ObserverDerivatives(
        R_hat_dot=-hat(np.asarray(omega_m) - est.b_hat) @ R_hat + R_hat @ Ww,
        b_hat_dot=gains.gamma_o * R_hat @ inn.ups_o,
        P_hat_dot=V_hat - Ww @ P_hat - w.w_v,
        V_hat_dot=-(thrust / m) * R_hat.T @ E3 - Ww @ V_hat - w.w_a,
    )


def prediction_input(omega_m, b_hat, thrust: float, m: float) -> TangentInput:
    return TangentInput(
        np.asarray(omega_m, dtype=float) - b_hat, np.zeros(3), -(thrust / m) * E3, 1.0
    )


def observer_predict(X_hat: NavState, omega_m, b_hat, thrust: float, m: float, dt: float) -> np.ndarray:
    """``X_hat exp(U_hat dt)``; the result is not yet on the group (row 5 is shifted)."""
    if not dt > 0.0:
        raise PreconditionError("observer step requires dt > 0")
    return X_hat.matrix @ exp_se23(prediction_input(omega_m, b_hat, thrust, m), dt)


def observer_correct(X_pred: np.ndarray, w: CorrectionFactors, dt: float) -> NavState:
    return NavState(exp_se23(w.as_input().scaled(-1.0), dt) @ X_pred).renormalized()


def bias_update(b_hat, R_hat, ups_o, gains: ObserverGains, dt: float) -> np.ndarray:
    return np.asarray(b_hat) + dt * gains.gamma_o * np.asarray(R_hat) @ ups_o


@dataclass(frozen=True)
class ObserverStepResult:
    state: EstimatorState
    innovations: Innovations
    corrections: CorrectionFactors


def observer_step_detailed(
    est: EstimatorState,
    meas: BodyMeasurements,
    fs: FeatureSet,
    thrust: float,
    m: float,
    g: float,
    gains: ObserverGains,
    dt: float,
) -> ObserverStepResult:
    """One predict/correct/bias cycle.

    Innovations use the pre-step estimate. Prediction right-multiplies
    ``exp(U_hat dt)``, correction left-multiplies ``exp(-W dt)``, then the
    bias integrates with the corrected attitude.
    """
    inn = observer_innovations(est.R_hat, est.P_hat, meas, fs)
    w = correction_factors(inn, fs, gains, g)
    X_pred = observer_predict(est.X_hat, meas.omega_m, est.b_hat, thrust, m, dt)
    X_new = observer_correct(X_pred, w, dt)
    b_new = bias_update(est.b_hat, X_new.R, inn.ups_o, gains, dt)
    return ObserverStepResult(EstimatorState(X_new, b_new), inn, w)


def observer_step_discrete(
    est: EstimatorState,
    meas: BodyMeasurements,
    fs: FeatureSet,
    thrust: float,
    m: float,
    g: float,
    gains: ObserverGains,
    dt: float,
) -> EstimatorState:
    return observer_step_detailed(est, meas, fs, thrust, m, g, gains, dt).state


def observer_step_euler(
    est: EstimatorState,
    meas: BodyMeasurements,
    fs: FeatureSet,
    thrust: float,
    m: float,
    g: float,
    gains: ObserverGains,
    dt: float,
) -> EstimatorState:
    """Explicit Euler step of the continuous estimator (reference integrator)."""
    inn = observer_innovations(est.R_hat, est.P_hat, meas, fs)
    w = correction_factors(inn, fs, gains, g)
    d = observer_derivatives(est, meas.omega_m, thrust, m, w, inn, gains)
    X = NavState.from_parts(
        est.R_hat + dt * d.R_hat_dot,
        est.P_hat + dt * d.P_hat_dot,
        est.V_hat + dt * d.V_hat_dot,
    )
    return EstimatorState(X, est.b_hat + dt * d.b_hat_dot)


@dataclass(frozen=True)
class EstimationErrors:
    R_tilde: np.ndarray
    attitude: float
    b_tilde: np.ndarray
    P_tilde: np.ndarray
    V_tilde: np.ndarray


def estimation_errors(est: EstimatorState, truth: NavState, b_true) -> EstimationErrors:
    R_tilde = est.R_hat.T @ truth.R
    return EstimationErrors(
        R_tilde=R_tilde,
        attitude=attitude_distance(R_tilde),
        b_tilde=np.asarray(b_true, dtype=float) - est.b_hat,
        P_tilde=est.P_hat - R_tilde @ truth.P,
        V_tilde=est.V_hat - R_tilde @ truth.V,
    )


def error_nav_state(est: EstimatorState, truth: NavState) -> NavState:
    """``X_hat X^{-1}``; its blocks are the attitude/position/velocity errors."""
    return nav_compose(est.X_hat, nav_inverse(truth))


def lyapunov_surrogate(R_tilde, b_tilde, fs: FeatureSet, gamma_o: float) -> float:
    """``Tr((I - R_tilde) M) / 2 + |b_tilde|^2 / (2 gamma_o)``."""
    b = np.asarray(b_tilde, dtype=float)
    return 0.5 * float(np.trace((np.eye(3) - R_tilde) @ fs.M)) + float(b @ b) / (
        2.0 * gamma_o
    )
