"""Closed-loop main loop, logging and summary metrics."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import yaml

from ..controller import ControlCommand, ControllerGains, torque_law
from ..guidance import (
    GuidanceGains,
    SingularThrustDirection,
    ThetaState,
    desired_rates,
    extract_attitude,
    hover_trajectory,
    intermediary_F,
    intermediary_force,
    reference_trajectory,
    theta_jerk,
    theta_step,
)
from ..liegroup import attitude_distance
from ..measurement import (
    aggregate_arrays,
    controller_innovation,
    observer_innovations,
    synthesize_measurements,
)
from ..observer import (
    EstimatorState,
    ObserverGains,
    bias_update,
    correction_factors,
    lyapunov_surrogate,
    observer_correct,
    observer_derivatives,
    observer_predict,
)
from ..plant import PlantParams, PlantState, gyro_output, plant_step
from ..quaternion import (
    QuatEstimatorState,
    quat_bias_update,
    quat_correct,
    quat_innovations,
    quat_predict,
    rot_to_quat,
)
from .config import ScenarioConfig
from .metrics import fit_decay


def _vec(prefix: str) -> list[str]:
    return [f"{prefix}_{i}" for i in (1, 2, 3)]


def _mat(prefix: str) -> list[str]:
    return [f"{prefix}_{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]


LOG_COLUMNS: tuple[str, ...] = tuple(
    ["t"]
    + _mat("R") + _vec("Omega") + _vec("P") + _vec("V")
    + _mat("Rhat") + _vec("bhat") + _vec("Phat") + _vec("Vhat")
    + _mat("Rd") + _vec("Omegad") + _vec("Pd") + _vec("Vd")
    + ["err_R_o", "err_b", "err_P_o", "err_V_o"]
    + ["err_R_c", "err_Omega_c", "err_P_c", "err_V_c"]
    + ["lyap_o"]
    + _vec("torque") + ["thrust"]
)
COL = {name: i for i, name in enumerate(LOG_COLUMNS)}

# step labels in loop order, as reported to a tracer
STEP_NAMES = (
    "theta_thrust",
    "desired_attitude",
    "innovations",
    "predict",
    "correct",
    "force_derivatives",
    "desired_rates",
    "torque",
    "bias_update",
)


class SimulationDiverged(RuntimeError):
    def __init__(self, step: int, t: float):
        self.step = step
        self.t = t
        super().__init__(f"non-finite value at step {step} (t = {t:.6g} s)")


@dataclass
class ScenarioResult:
    data: np.ndarray
    summary: dict

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, COL[name]]

    def block(self, prefix: str) -> np.ndarray:
        """Logged vector ``(n, 3)`` or matrix ``(n, 3, 3)`` with this prefix."""
        if f"{prefix}_11" in COL:
            i = COL[f"{prefix}_11"]
            return self.data[:, i : i + 9].reshape(-1, 3, 3)
        i = COL[f"{prefix}_1"]
        return self.data[:, i : i + 3]


@dataclass(frozen=True)
class Scenario:
    """Objects built once from a config."""

    cfg: ScenarioConfig
    params: PlantParams
    fs: object
    obs_gains: ObserverGains
    guid_gains: GuidanceGains
    ctrl_gains: ControllerGains
    trajectory: Callable
    meas_bias: Optional[np.ndarray]


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    pl = cfg.plant
    J = np.array(pl.J, dtype=float)
    params = PlantParams(J=J, m=pl.m, g=pl.g, b_omega_true=np.array(pl.b_omega_true))
    fs = aggregate_arrays(np.array(cfg.landmarks.points, dtype=float), cfg.landmarks.weight_array())
    o, c = cfg.observer, cfg.controller
    traj = reference_trajectory if cfg.trajectory == "default" else hover_trajectory(cfg.hover_point)
    bias = cfg.measurement.bias
    return Scenario(
        cfg=cfg,
        params=params,
        fs=fs,
        obs_gains=ObserverGains(o.gamma_o, o.k_o1, o.k_o2, o.k_o3),
        guid_gains=GuidanceGains(c.k_theta1, c.k_theta2, c.k_c3, c.k_c4),
        ctrl_gains=ControllerGains(c.k_c1, c.k_c2, J=J, m=pl.m, g=pl.g),
        trajectory=traj,
        meas_bias=None if bias is None else np.array(bias, dtype=float),
    )


class SingularGuidance(RuntimeError):
    def __init__(self, step: int, t: float):
        self.step = step
        self.t = t
        super().__init__(f"intermediary input reached the singular direction at step {step} (t = {t:.6g} s)")


def draw_noise(cfg: ScenarioConfig, n_landmarks: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-step gyro ``(N, 3)`` and landmark ``(N, n, 3)`` noise.

    Drawn in one block from the seeded generator; the sample order (gyro
    first, then landmarks, step by step) is the order the reference loop
    consumes them in.
    """
    N = cfg.n_steps
    gs, ms = cfg.measurement.gyro_noise_std, cfg.measurement.noise_std
    width = (3 if gs > 0.0 else 0) + (3 * n_landmarks if ms > 0.0 else 0)
    z = np.random.default_rng(cfg.seed).standard_normal((N, width))
    gyro = np.zeros((N, 3))
    meas = np.zeros((N, n_landmarks, 3))
    c = 0
    if gs > 0.0:
        gyro[:] = gs * z[:, :3]
        c = 3
    if ms > 0.0:
        meas[:] = ms * z[:, c:].reshape(N, n_landmarks, 3)
    return gyro, meas


def run_scenario(
    cfg: ScenarioConfig,
    tracer: Optional[Callable[[str], None]] = None,
    engine: str = "auto",
) -> ScenarioResult:
    """Run the closed loop for ``cfg.n_steps`` steps.

    Row ``k`` of the log holds truth, estimate and desired values at
    ``t_k = k dt`` (estimate before its update) together with the command
    applied over ``[t_k, t_k + dt)``.

    ``engine`` is ``"compiled"``, ``"reference"`` (the step functions of the
    library, one call per step stage) or ``"auto"``: compiled unless a
    ``tracer`` is given. The tracer receives each stage name from
    ``STEP_NAMES`` as it runs.
    """
    if engine not in ("auto", "compiled", "reference"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine == "compiled" and tracer is not None:
        raise ValueError("the compiled engine does not support tracing")
    if engine == "compiled" or (engine == "auto" and tracer is None):
        return _run_compiled(cfg)
    return _run_reference(cfg, tracer)


def _initial_states(cfg: ScenarioConfig):
    ti, ie = cfg.initial_truth, cfg.initial_estimate
    s = PlantState(
        cfg.truth_rotation(), np.array(ti.Omega, float), np.array(ti.P, float), np.array(ti.V, float)
    )
    est = EstimatorState.initial(cfg.estimate_rotation(), ie.P, ie.V, ie.b_omega)
    th = ThetaState(np.array(ie.theta, float), np.array(ie.theta_dot, float))
    return s, est, th


def _run_compiled(cfg: ScenarioConfig) -> ScenarioResult:
    from . import engine as eng

    sc = build_scenario(cfg)
    p, fs = sc.params, sc.fs
    s, est, th = _initial_states(cfg)
    gyro, meas_noise = draw_noise(cfg, len(fs))
    bias = sc.meas_bias if sc.meas_bias is not None else np.zeros((len(fs), 3))
    hover = np.array(cfg.hover_point, dtype=float)
    n = cfg.n_steps
    data = np.empty(((n - 1) // cfg.log_every + 1, len(LOG_COLUMNS)))
    og, gg, cg = sc.obs_gains, sc.guid_gains, sc.ctrl_gains
    J = np.asarray(p.J, dtype=float)
    t0 = time.perf_counter()
    status, step, rows = eng.run_loop(
        n, cfg.log_every, cfg.dt, cfg.backend == "quaternion",
        s.R, s.Omega, s.P, s.V,
        est.R_hat, rot_to_quat(est.R_hat), est.P_hat, est.V_hat, est.b_hat,
        th.theta, th.theta_dot,
        float(p.m), float(p.g), J, np.linalg.inv(J), np.asarray(p.b_omega_true, dtype=float),
        fs.points, fs.weights, float(fs.s_total), fs.p_c, fs.M, fs._half_centred,
        bias, meas_noise, gyro,
        0 if cfg.trajectory == "default" else 1, hover,
        og.gamma_o, og.k_o1, og.k_o2, og.k_o3,
        gg.k_theta1, gg.k_theta2, cg.k_c1, cg.k_c2, gg.k_c3, gg.k_c4,
        data,
    )
    wall = time.perf_counter() - t0
    if status == eng.STATUS_NONFINITE:
        raise SimulationDiverged(int(step), step * cfg.dt)
    if status == eng.STATUS_SINGULAR_THRUST:
        raise SingularGuidance(int(step), step * cfg.dt)
    result = ScenarioResult(data[:rows], {})
    result.summary.update(summarize(result, cfg, wall))
    return result


def _run_reference(cfg: ScenarioConfig, tracer) -> ScenarioResult:
    sc = build_scenario(cfg)
    p, fs, dt = sc.params, sc.fs, cfg.dt
    og, gg, cg = sc.obs_gains, sc.guid_gains, sc.ctrl_gains
    m, g = p.m, p.g
    b_true = np.asarray(p.b_omega_true, dtype=float)
    quat = cfg.backend == "quaternion"
    trace = tracer if tracer is not None else (lambda name: None)
    rng = np.random.default_rng(cfg.seed)
    noise = cfg.measurement.noise_std
    gyro_noise = cfg.measurement.gyro_noise_std

    s, est, th = _initial_states(cfg)
    qst = QuatEstimatorState.from_estimator(est) if quat else None

    n = cfg.n_steps
    n_rows = (n - 1) // cfg.log_every + 1
    data = np.empty((n_rows, len(LOG_COLUMNS)))
    row_i = 0
    t0 = time.perf_counter()

    k = 0
    try:
        # overflow is detected below and reported with its step index
        with np.errstate(all="ignore"):
            for k in range(n):
                t = k * dt
                # Step 1: sensor outputs at t_k
                omega_m = gyro_output(s, p, gyro_noise, rng=rng)
                meas = synthesize_measurements(
                    s.R, s.P, fs, sc.meas_bias, noise, rng=rng, omega_m=omega_m, timestamp=t
                )
                traj = sc.trajectory(t)
                if quat:
                    R_hat, P_hat, V_hat, b_hat = qst.R_hat, qst.P_hat, qst.V_hat, qst.b_hat
                else:
                    R_hat, P_hat, V_hat, b_hat = est.R_hat, est.P_hat, est.V_hat, est.b_hat

                # Step 2: auxiliary variable, F and thrust
                trace("theta_thrust")
                th, theta_ddot = theta_step(th, P_hat, V_hat, traj, gg, dt)
                F = intermediary_force(traj, th, gg)

                # Step 3: desired attitude
                trace("desired_attitude")
                try:
                    thrust, Q_d, R_d = extract_attitude(F, m, g)
                except SingularThrustDirection:
                    raise SingularGuidance(k, t) from None

                # Step 4: innovations and correction factors
                trace("innovations")
                if quat:
                    inn = quat_innovations(R_hat, P_hat, meas, fs)
                else:
                    inn = observer_innovations(R_hat, P_hat, meas, fs)
                w = correction_factors(inn, fs, og, g)

                # Steps 5-6: predict, correct
                trace("predict")
                if quat:
                    q_pred = quat_predict(qst, omega_m, thrust, m, dt)
                else:
                    X_pred = observer_predict(est.X_hat, omega_m, b_hat, thrust, m, dt)
                trace("correct")
                if quat:
                    q_corr = quat_correct(q_pred, w, dt)
                else:
                    X_new = observer_correct(X_pred, w, dt)

                # Step 7: F derivatives, using the estimator rates at t_k
                trace("force_derivatives")
                d = observer_derivatives(est if not quat else qst.to_estimator(), omega_m, thrust, m, w, inn, og)
                theta_3 = theta_jerk(th, theta_ddot, d.P_hat_dot, d.V_hat_dot, traj, gg)
                F, F_dot, F_ddot = intermediary_F(traj, th, theta_ddot, theta_3, gg)

                # Step 8: desired angular velocity and its derivative
                trace("desired_rates")
                guid = desired_rates(F, F_dot, F_ddot, thrust, Q_d, R_d, g)

                # Step 9: torque from measurements and the pre-update bias estimate
                trace("torque")
                ups_c = controller_innovation(R_d, meas, fs)
                torque = torque_law(ups_c, R_d, guid.Omega_d, guid.Omega_d_dot, omega_m, b_hat, cg)
                cmd = ControlCommand(torque, float(thrust))

                # Step 10: bias update with the corrected attitude
                trace("bias_update")
                if quat:
                    qst_next = quat_bias_update(q_corr, inn.ups_o, og, dt)
                else:
                    est_next = EstimatorState(X_new, bias_update(b_hat, X_new.R, inn.ups_o, og, dt))

                if k % cfg.log_every == 0:
                    row = data[row_i]
                    _fill_row(row, t, s, R_hat, b_hat, P_hat, V_hat, R_d, guid.Omega_d, traj, b_true, fs, og, cmd)
                    if not np.all(np.isfinite(row)):
                        raise SimulationDiverged(k, t)
                    row_i += 1

                # Step 11: advance truth and estimator
                s = plant_step(s, cmd, p, dt)
                if quat:
                    qst = qst_next
                else:
                    est = est_next
                if not (np.all(np.isfinite(s.R)) and np.all(np.isfinite(s.Omega)) and np.all(np.isfinite(s.V))):
                    raise SimulationDiverged(k + 1, t + dt)
    except (ArithmeticError, ValueError):
        raise SimulationDiverged(k, k * dt) from None

    wall = time.perf_counter() - t0
    result = ScenarioResult(data[:row_i], {})
    result.summary.update(summarize(result, cfg, wall))
    return result


def _fill_row(row, t, s, R_hat, b_hat, P_hat, V_hat, R_d, Omega_d, traj, b_true, fs, og, cmd):
    R_tilde_o = R_hat.T @ s.R
    b_tilde = b_true - b_hat
    R_tilde_c = R_d.T @ s.R
    row[0] = t
    row[1:10] = s.R.ravel()
    row[10:13] = s.Omega
    row[13:16] = s.P
    row[16:19] = s.V
    row[19:28] = R_hat.ravel()
    row[28:31] = b_hat
    row[31:34] = P_hat
    row[34:37] = V_hat
    row[37:46] = R_d.ravel()
    row[46:49] = Omega_d
    row[49:52] = traj.P_d
    row[52:55] = traj.V_d
    row[55] = attitude_distance(R_tilde_o)
    row[56] = math.sqrt(b_tilde @ b_tilde)
    row[57] = np.linalg.norm(P_hat - R_tilde_o @ s.P)
    row[58] = np.linalg.norm(V_hat - R_tilde_o @ s.V)
    row[59] = attitude_distance(R_tilde_c)
    row[60] = np.linalg.norm(R_d.T @ (Omega_d - s.Omega))
    row[61] = np.linalg.norm(s.P - traj.P_d)
    row[62] = np.linalg.norm(s.V - traj.V_d)
    row[63] = lyapunov_surrogate(R_tilde_o, b_tilde, fs, og.gamma_o)
    row[64:67] = cmd.torque
    row[67] = cmd.thrust


def observer_error_composite(result: ScenarioResult) -> np.ndarray:
    """Sum of the four observer error norms."""
    return (
        result.column("err_R_o")
        + result.column("err_b")
        + result.column("err_P_o")
        + result.column("err_V_o")
    )


def tracking_error_composite(result: ScenarioResult) -> np.ndarray:
    return (
        result.column("err_R_c")
        + result.column("err_Omega_c")
        + result.column("err_P_c")
        + result.column("err_V_c")
    )


def _safe_rate(t, e, window) -> Optional[float]:
    try:
        return fit_decay(t, e, window).slope
    except ValueError:
        return None


def summarize(result: ScenarioResult, cfg: ScenarioConfig, wall_time: float) -> dict:
    t = result.t
    last = result.data[-1]
    terminal = {
        name: float(last[COL[name]])
        for name in LOG_COLUMNS
        if name.startswith("err_") or name == "lyap_o"
    }
    torque = np.linalg.norm(result.block("torque"), axis=1)
    thrust = result.column("thrust")
    hi = min(10.0, float(t[-1]))
    return {
        "backend": cfg.backend,
        "seed": cfg.seed,
        "dt": cfg.dt,
        "steps": cfg.n_steps,
        "rows": int(len(t)),
        "t_end": float(t[-1]),
        "terminal_errors": terminal,
        "decay_rates": {
            "observer_composite_1_10s": _safe_rate(t, observer_error_composite(result), (1.0, hi)),
            "tracking_composite_1_10s": _safe_rate(t, tracking_error_composite(result), (1.0, hi)),
        },
        "max_torque_norm": float(torque.max()),
        "max_thrust": float(thrust.max()),
        "min_thrust": float(thrust.min()),
        "wall_time_s": float(wall_time),
    }


CSV_FORMAT = "%.17g"


def format_csv(result: ScenarioResult) -> str:
    import io

    buf = io.StringIO()
    np.savetxt(buf, result.data, fmt=CSV_FORMAT, delimiter=",", header=",".join(LOG_COLUMNS), comments="")
    return buf.getvalue()


def write_csv(result: ScenarioResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(result), encoding="utf-8")
    return path


def read_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_summary(summary: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(summary, sort_keys=False), encoding="utf-8")
    return path


PLOT_COLUMNS = (
    ["t", "P_1", "P_2", "P_3", "Pd_1", "Pd_2", "Pd_3"]
    + ["err_R_o", "err_b", "err_P_o", "err_V_o", "err_R_c", "err_Omega_c", "err_P_c", "err_V_c"]
    + ["torque_1", "torque_2", "torque_3", "thrust"]
)


def write_plot_data(result: ScenarioResult, path, every: int = 100) -> Path:
    """Downsampled track, error and command series for external plotting."""
    if every < 1:
        raise ValueError("every must be >= 1")
    idx = [COL[c] for c in PLOT_COLUMNS]
    sub = result.data[::every][:, idx]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, sub, fmt=CSV_FORMAT, delimiter=",", header=",".join(PLOT_COLUMNS), comments="")
    return path
