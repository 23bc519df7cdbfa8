"""Compiled closed-loop engine.

A numba transcription of the loop in :mod:`vtolnav.harness.runner`, used for
full-length runs. It performs the same operations in the same order as the
step functions of the library modules; the test suite holds the two paths
together step by step. Anything needing a call trace or a new law should go
through the reference loop first.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_SINGULAR_THRUST = 2

_SMALL_ROT = 1e-8
_SMALL_JAC = 0.3
_JAC_TERMS = 7
_SMALL_QUAT = 1e-8
_RENORM_TOL = 1e-12
_ALPHA_MIN = 1e-9


@njit(cache=True)
def _hat(w):
    S = np.zeros((3, 3))
    S[0, 1] = -w[2]
    S[0, 2] = w[1]
    S[1, 0] = w[2]
    S[1, 2] = -w[0]
    S[2, 0] = -w[1]
    S[2, 1] = w[0]
    return S


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _norm(v):
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


@njit(cache=True)
def _exp_se23(omega, v_col, a_col, kappa, dt):
    w = omega * dt
    theta = _norm(w)
    t2 = theta * theta
    if theta < _SMALL_ROT:
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    else:
        s = math.sin(0.5 * theta) / (0.5 * theta)
        a = math.sin(theta) / theta
        b = 0.5 * s * s
    if theta < _SMALL_JAC:
        c1 = 0.0
        c2 = 0.0
        c3 = 0.0
        for k in range(_JAC_TERMS - 1, -1, -1):
            c1 = c1 * -t2 + 1.0 / math.gamma(2 * k + 3)
            c2 = c2 * -t2 + 1.0 / math.gamma(2 * k + 4)
            c3 = c3 * -t2 + 1.0 / math.gamma(2 * k + 5)
    else:
        half = math.sin(0.5 * theta) / (0.5 * theta)
        c1 = 0.5 * half * half
        c2 = (theta - math.sin(theta)) / (t2 * theta)
        c3 = (0.5 - c1) / t2
    K = _hat(w)
    K2 = K @ K
    I = np.eye(3)
    J1 = I + c1 * K + c2 * K2
    J2 = 0.5 * I + c2 * K + c3 * K2
    v = v_col * dt
    acc = a_col * dt
    kdt = kappa * dt
    E = np.eye(5)
    E[:3, :3] = I + a * K + b * K2
    E[:3, 3] = J1 @ v + kdt * (J2 @ acc)
    E[:3, 4] = J1 @ acc
    E[4, 3] = kdt
    return E


@njit(cache=True)
def _renormalize(R):
    D = R @ R.T - np.eye(3)
    if math.sqrt(np.sum(D * D)) > _RENORM_TOL:
        U, _, Vt = np.linalg.svd(R)
        S = np.eye(3)
        S[2, 2] = np.linalg.det(U @ Vt)
        return U @ S @ Vt
    return R


@njit(cache=True)
def _quat_to_rot(q):
    qv = q[1:].copy()
    R = (q[0] * q[0] - (qv @ qv)) * np.eye(3) + 2.0 * np.outer(qv, qv) - 2.0 * q[0] * _hat(qv)
    return R


@njit(cache=True)
def _quat_mul(p, q):
    out = np.empty(4)
    pv = p[1:]
    qv = q[1:]
    out[0] = p[0] * q[0] - (pv @ qv)
    out[1:] = p[0] * qv + q[0] * pv + _cross(pv, qv)
    return out


@njit(cache=True)
def _quat_exp(v):
    a = _norm(v)
    if a < _SMALL_QUAT:
        s = 1.0 - a * a / 6.0
    else:
        s = math.sin(a) / a
    out = np.empty(4)
    out[0] = math.cos(a)
    out[1:] = s * v
    return out


@njit(cache=True)
def _trajectory(kind, t, hover, out):
    # rows of out: P_d, V_d, P_d'', P_d''', P_d''''
    out[:, :] = 0.0
    if kind == 1:
        out[0, :] = hover
        return
    a = 0.19
    b = 0.4
    ca = math.cos(a * t)
    sa = math.sin(a * t)
    cb = math.cos(b * t)
    sb = math.sin(b * t)
    out[0, 0] = 6.0 * ca
    out[0, 1] = 3.0 * sb
    out[0, 2] = 3.5 + 0.15 * t
    out[1, 0] = -6.0 * a * sa
    out[1, 1] = 3.0 * b * cb
    out[1, 2] = 0.15
    out[2, 0] = -6.0 * a**2 * ca
    out[2, 1] = -3.0 * b**2 * sb
    out[3, 0] = 6.0 * a**3 * sa
    out[3, 1] = -3.0 * b**3 * cb
    out[4, 0] = 6.0 * a**4 * ca
    out[4, 1] = 3.0 * b**4 * sb


@njit(cache=True)
def _xi_parts(F, F_dot, g):
    f1, f2, f3 = F[0], F[1], F[2]
    d1, d2, d3 = F_dot[0], F_dot[1], F_dot[2]
    a1 = math.sqrt(f1 * f1 + f2 * f2 + (g - f3) * (g - f3))
    a2 = a1 + g - f3
    a1d = (f1 * d1 + f2 * d2 + (f3 - g) * d3) / a1
    a2d = a1d - d3
    N = np.empty((3, 3))
    N[0, 0] = -f1 * f2
    N[0, 1] = -f2 * f2 + a1 * a2
    N[0, 2] = f2 * a2
    N[1, 0] = f1 * f1 - a1 * a2
    N[1, 1] = f1 * f2
    N[1, 2] = -f1 * a2
    N[2, 0] = f2 * a1
    N[2, 1] = -f1 * a1
    N[2, 2] = 0.0
    a12d = a1d * a2 + a1 * a2d
    Nd = np.empty((3, 3))
    Nd[0, 0] = -(d1 * f2 + f1 * d2)
    Nd[0, 1] = -2.0 * f2 * d2 + a12d
    Nd[0, 2] = d2 * a2 + f2 * a2d
    Nd[1, 0] = 2.0 * f1 * d1 - a12d
    Nd[1, 1] = d1 * f2 + f1 * d2
    Nd[1, 2] = -(d1 * a2 + f1 * a2d)
    Nd[2, 0] = d2 * a1 + f2 * a1d
    Nd[2, 1] = -(d1 * a1 + f1 * a1d)
    Nd[2, 2] = 0.0
    den = a1 * a1 * a2
    den_d = 2.0 * a1 * a1d * a2 + a1 * a1 * a2d
    return N / den, Nd / den - N * den_d / (den * den)


@njit(cache=True)
def _omega_dot(w, tau, J, J_inv):
    return J_inv @ (_hat(J @ w) @ w + tau)


@njit(cache=True)
def _fill_row(row, t, R, Om, P, V, R_hat, b_hat, P_hat, V_hat, R_d, Omega_d, traj,
              b_true, M, gamma_o, torque, thrust):
    Rto = R_hat.T @ R
    bt = b_true - b_hat
    Rtc = R_d.T @ R
    row[0] = t
    row[1:10] = R.ravel()
    row[10:13] = Om
    row[13:16] = P
    row[16:19] = V
    row[19:28] = R_hat.ravel()
    row[28:31] = b_hat
    row[31:34] = P_hat
    row[34:37] = V_hat
    row[37:46] = R_d.ravel()
    row[46:49] = Omega_d
    row[49:52] = traj[0]
    row[52:55] = traj[1]
    row[55] = 0.25 * (3.0 - np.trace(Rto))
    row[56] = math.sqrt(bt @ bt)
    row[57] = _norm(P_hat - Rto @ P)
    row[58] = _norm(V_hat - Rto @ V)
    row[59] = 0.25 * (3.0 - np.trace(Rtc))
    row[60] = _norm(R_d.T @ (Omega_d - Om))
    row[61] = _norm(P - traj[0])
    row[62] = _norm(V - traj[1])
    row[63] = 0.5 * np.trace((np.eye(3) - Rto) @ M) + (bt @ bt) / (2.0 * gamma_o)
    row[64:67] = torque
    row[67] = thrust


@njit(cache=True)
def run_loop(
    n_steps, log_every, dt, quat_backend,
    R, Om, P, V,
    R_hat0, Q_hat0, P_hat, V_hat, b_hat,
    theta, theta_dot,
    m, g, J, J_inv, b_true,
    points, weights, s_total, p_c, M, half_centred,
    meas_bias, meas_noise, gyro_noise,
    traj_kind, hover,
    gamma_o, k_o1, k_o2, k_o3,
    k_th1, k_th2, k_c1, k_c2, k_c3, k_c4,
    data,
):
    """Returns ``(status, step, rows_written)``."""
    n = points.shape[0]
    e3 = np.array([0.0, 0.0, 1.0])
    zero3 = np.zeros(3)
    traj = np.zeros((5, 3))
    X_hat = np.eye(5)
    X_hat[:3, :3] = R_hat0.T
    X_hat[:3, 3] = P_hat
    X_hat[:3, 4] = V_hat
    Q_hat = Q_hat0.copy()
    P_hat = P_hat.copy()
    V_hat = V_hat.copy()
    b_hat = b_hat.copy()
    theta = theta.copy()
    theta_dot = theta_dot.copy()
    R = R.copy()
    Om = Om.copy()
    P = P.copy()
    V = V.copy()
    centred = points - p_c
    row_i = 0
    ry = np.empty((n, 3))
    for k in range(n_steps):
        t = k * dt
        # Step 1: sensors and reference
        omega_m = Om + b_true + gyro_noise[k]
        y = (points - P) @ R.T + meas_bias + meas_noise[k]
        _trajectory(traj_kind, t, hover, traj)
        if quat_backend:
            R_hat = _quat_to_rot(Q_hat)
        else:
            R_hat = X_hat[:3, :3].T.copy()
            P_hat = X_hat[:3, 3].copy()
            V_hat = X_hat[:3, 4].copy()

        # Step 2: theta, F, thrust
        th_dd = (
            -k_th1 * np.tanh(theta) - k_th2 * np.tanh(theta_dot)
            + k_c3 * (P_hat - traj[0] - theta) + k_c4 * (V_hat - traj[1] - theta_dot)
        )
        theta_dot = theta_dot + dt * th_dd
        theta = theta + dt * theta_dot
        t1 = np.tanh(theta)
        t2 = np.tanh(theta_dot)
        F = traj[2] - k_th1 * t1 - k_th2 * t2

        # Step 3: desired attitude
        a1 = _norm(g * e3 - F)
        a2 = a1 + g - F[2]
        if a2 < _ALPHA_MIN or a1 < _ALPHA_MIN:
            return STATUS_SINGULAR_THRUST, k, row_i
        thrust = m * a1
        q0 = math.sqrt(max(m * (g - F[2]) / (2.0 * thrust) + 0.5, 0.0))
        if q0 < math.sqrt(_ALPHA_MIN):
            return STATUS_SINGULAR_THRUST, k, row_i
        kq = m / (2.0 * thrust * q0)
        Q_d = np.array([q0, kq * F[1], -kq * F[0], 0.0])
        R_d = _quat_to_rot(Q_d)

        # Step 4: innovations and correction factors
        ry[:, :] = y @ R_hat
        ups = np.zeros(3)
        if quat_backend:
            RM = (ry.T * weights) @ centred
            ups[0] = 0.5 * (RM[2, 1] - RM[1, 2])
            ups[1] = 0.5 * (RM[0, 2] - RM[2, 0])
            ups[2] = 0.5 * (RM[1, 0] - RM[0, 1])
        else:
            for i in range(n):
                ups += _cross(half_centred[i], ry[i])
        y_err = weights @ (P_hat + ry - points)
        w_om = k_o1 * ups
        Ww = _hat(w_om)
        w_v = k_o2 * y_err - Ww @ (y_err + s_total * p_c) / s_total
        w_a = -g * e3 + k_o3 * y_err

        # Steps 5-6: predict, correct
        omega_hat = omega_m - b_hat
        Eu = _exp_se23(omega_hat, zero3, -(thrust / m) * e3, 1.0, dt)
        Ew = _exp_se23(-w_om, -w_v, -w_a, -1.0, dt)
        if quat_backend:
            Rt = np.ascontiguousarray(R_hat.T)
            Qp = _quat_mul(Q_hat, _quat_exp(0.5 * dt * omega_hat))
            Pp = Rt @ Eu[:3, 3].copy() + P_hat + dt * V_hat
            Vp = Rt @ Eu[:3, 4].copy() + V_hat
            Qn = _quat_mul(_quat_exp(-0.5 * dt * w_om), Qp)
            Q_new = Qn / math.sqrt(Qn @ Qn)
            EwR = Ew[:3, :3].copy()
            P_new = EwR @ Pp + Ew[:3, 3] + dt * Ew[:3, 4]
            V_new = EwR @ Vp + Ew[:3, 4]
            R_new = _quat_to_rot(Q_new)
        else:
            X_new = Ew @ (X_hat @ Eu)
            Rn = X_new[:3, :3].T.copy()
            Rr = _renormalize(Rn)
            if Rr is not Rn:
                Pn = X_new[:3, 3].copy()
                Vn = X_new[:3, 4].copy()
                X_new = np.eye(5)
                X_new[:3, :3] = Rr.T
                X_new[:3, 3] = Pn
                X_new[:3, 4] = Vn
            R_new = X_new[:3, :3].T.copy()

        # Step 7: F derivatives with the estimator rates at t_k
        P_hat_dot = V_hat - Ww @ P_hat - w_v
        V_hat_dot = -(thrust / m) * (R_hat.T @ e3) - Ww @ V_hat - w_a
        H = 1.0 - t1**2
        Hd = 1.0 - t2**2
        th_3 = (
            -k_th1 * H * theta_dot - k_th2 * Hd * th_dd
            + k_c3 * (P_hat_dot - traj[1] - theta_dot)
            + k_c4 * (V_hat_dot - traj[2] - th_dd)
        )
        F_dot = traj[3] - k_th1 * H * theta_dot - k_th2 * Hd * th_dd
        z = H * (th_dd - 2.0 * t1 * theta_dot**2)
        z_dot = Hd * (th_3 - 2.0 * t2 * th_dd**2)
        F_ddot = traj[4] - k_th1 * z - k_th2 * z_dot

        # Step 8: desired rates
        Xi, Xi_dot = _xi_parts(F, F_dot, g)
        Omega_d = Xi @ F_dot
        Omega_d_dot = Xi_dot @ F_dot + Xi @ F_ddot

        # Step 9: torque
        ryd = y @ R_d
        ups_c = np.zeros(3)
        for i in range(n):
            ups_c += _cross(half_centred[i], ryd[i])
        torque = (
            k_c1 * (R_d @ ups_c) + k_c2 * (Omega_d - omega_hat)
            + J @ Omega_d_dot - _hat(J @ omega_hat) @ Omega_d
        )

        # Step 10: bias update with the corrected attitude
        b_new = b_hat + dt * gamma_o * (R_new @ ups)

        if k % log_every == 0:
            row = data[row_i]
            _fill_row(row, t, R, Om, P, V, R_hat, b_hat, P_hat, V_hat, R_d, Omega_d,
                      traj, b_true, M, gamma_o, torque, thrust)
            if not np.all(np.isfinite(row)):
                return STATUS_NONFINITE, k, row_i
            row_i += 1

        # Step 11: advance truth and estimator
        Eg = _exp_se23(zero3, zero3, g * e3, -1.0, dt)
        Ut = _exp_se23(Om, zero3, -(thrust / m) * e3, 1.0, dt)
        X = np.eye(5)
        X[:3, :3] = R.T
        X[:3, 3] = P
        X[:3, 4] = V
        X = Eg @ X @ Ut
        R = _renormalize(X[:3, :3].T.copy())
        P = X[:3, 3].copy()
        V = X[:3, 4].copy()
        k1 = _omega_dot(Om, torque, J, J_inv)
        k2 = _omega_dot(Om + 0.5 * dt * k1, torque, J, J_inv)
        k3 = _omega_dot(Om + 0.5 * dt * k2, torque, J, J_inv)
        k4 = _omega_dot(Om + dt * k3, torque, J, J_inv)
        Om = Om + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        if quat_backend:
            Q_hat = Q_new
            P_hat = P_new
            V_hat = V_new
        else:
            X_hat = X_new
        b_hat = b_new
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(Om)) and np.all(np.isfinite(V))):
            return STATUS_NONFINITE, k + 1, row_i
    return STATUS_OK, n_steps, row_i
