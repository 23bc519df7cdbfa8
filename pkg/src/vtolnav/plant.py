"""Ground-truth rigid-body VTOL model and sensor outputs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controller import ControlCommand
from .liegroup import E3, NavState, TangentInput, exp_se23, exp_so3, hat, renormalize


def _default_inertia() -> np.ndarray:
    return np.diag([0.15, 0.23, 0.16])


@dataclass(frozen=True)
class PlantParams:
    J: np.ndarray = field(default_factory=_default_inertia)
    m: float = 3.0
    g: float = 9.81
    b_omega_true: np.ndarray = field(default_factory=lambda: np.array([0.1, -0.1, 0.05]))

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.shape != (3, 3) or not np.allclose(J, J.T) or np.linalg.eigvalsh(J)[0] <= 0:
            raise ValueError("J must be symmetric positive definite")
        if not self.m > 0.0:
            raise ValueError("m must be positive")

    @property
    def J_inv(self) -> np.ndarray:
        return np.linalg.inv(self.J)


@dataclass(frozen=True)
class PlantState:
    R: np.ndarray
    Omega: np.ndarray
    P: np.ndarray
    V: np.ndarray

    def nav(self) -> NavState:
        return NavState.from_parts(self.R, self.P, self.V)


@dataclass(frozen=True)
class PlantDerivatives:
    R_dot: np.ndarray
    Omega_dot: np.ndarray
    P_dot: np.ndarray
    V_dot: np.ndarray


def _omega_dot(Omega, torque, J, J_inv) -> np.ndarray:
    return J_inv @ (hat(J @ Omega) @ Omega + torque)


def plant_derivatives(s: PlantState, cmd: ControlCommand, p: PlantParams) -> PlantDerivatives:
    J = np.asarray(p.J, dtype=float)
    return PlantDerivatives(
        R_dot=-hat(s.Omega) @ s.R,
        Omega_dot=_omega_dot(s.Omega, cmd.torque, J, p.J_inv),
        P_dot=s.V.copy(),
        V_dot=p.g * E3 - (cmd.thrust / p.m) * s.R.T @ E3,
    )


def gravity_input(g: float) -> TangentInput:
    return TangentInput(np.zeros(3), np.zeros(3), -g * E3, 1.0)


def plant_step(s: PlantState, cmd: ControlCommand, p: PlantParams, dt: float) -> PlantState:
    """Advance one step with the command held over ``dt``.

    Navigation part: ``X+ = exp(-G dt) X exp(U dt)`` with ``U`` built from the
    start-of-step rate, which is exact for held inputs. Angular rate: RK4 on
    Euler's equation.
    """
    if not dt > 0.0:
        raise ValueError("plant_step requires dt > 0")
    J = np.asarray(p.J, dtype=float)
    J_inv = p.J_inv
    tau = np.asarray(cmd.torque, dtype=float)
    U = TangentInput(s.Omega, np.zeros(3), -(cmd.thrust / p.m) * E3, 1.0)
    X = exp_se23(gravity_input(p.g).scaled(-1.0), dt) @ s.nav().matrix @ exp_se23(U, dt)
    nav = NavState(X)
    R = renormalize(nav.R)

    w = s.Omega
    k1 = _omega_dot(w, tau, J, J_inv)
    k2 = _omega_dot(w + 0.5 * dt * k1, tau, J, J_inv)
    k3 = _omega_dot(w + 0.5 * dt * k2, tau, J, J_inv)
    k4 = _omega_dot(w + dt * k3, tau, J, J_inv)
    Omega = w + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return PlantState(R, Omega, nav.P, nav.V)


def plant_step_euler(s: PlantState, cmd: ControlCommand, p: PlantParams, dt: float) -> PlantState:
    """Explicit Euler of the continuous equations (reference integrator)."""
    d = plant_derivatives(s, cmd, p)
    return PlantState(
        s.R + dt * d.R_dot, s.Omega + dt * d.Omega_dot, s.P + dt * d.P_dot, s.V + dt * d.V_dot
    )


def attitude_step(R, Omega, dt: float) -> np.ndarray:
    """``R+ = exp(-hat(Omega) dt) R``."""
    return exp_so3(-np.asarray(Omega, dtype=float) * dt) @ R


def gyro_output(
    s: PlantState,
    p: PlantParams,
    noise_std: float = 0.0,
    seed=None,
    *,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    out = s.Omega + np.asarray(p.b_omega_true, dtype=float)
    if noise_std > 0.0:
        gen = rng if rng is not None else np.random.default_rng(seed)
        out = out + gen.normal(0.0, noise_std, size=3)
    return out
