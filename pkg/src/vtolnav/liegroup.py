"""so(3), SO(3) and SE_2(3) primitives.

Conventions follow the navigation-matrix layout used throughout the package:

    X = [[R^T, P, V],
         [0,   1, 0],
         [0,   0, 1]]

where ``R`` maps inertial vectors into the body frame and evolves as
``Rdot = -hat(Omega) R``. ``NavState`` stores ``R^T`` in its top-left block and
exposes ``R`` through an accessor so callers never handle the transpose.

Vectors are ``(3,)`` float arrays, matrices ``(3, 3)`` / ``(5, 5)`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])
I3 = np.eye(3)

ORTHO_TOL = 1e-9
RENORM_TOL = 1e-12
_SMALL_ROT = 1e-8
# below this angle the Jacobian coefficients use their series (closed forms cancel)
_SMALL_JAC = 0.3
_JAC_TERMS = 7


class PreconditionError(ValueError):
    """Raised when an input violates an operation's precondition."""


def hat(omega) -> np.ndarray:
    w0, w1, w2 = float(omega[0]), float(omega[1]), float(omega[2])
    return np.array([[0.0, -w2, w1], [w2, 0.0, -w0], [-w1, w0, 0.0]])


def vex(S, tol: float = 1e-9) -> np.ndarray:
    """Inverse of :func:`hat`; ``S`` must be antisymmetric within ``tol``."""
    S = np.asarray(S, dtype=float)
    if np.max(np.abs(S + S.T)) > tol:
        raise PreconditionError("vex: matrix is not antisymmetric")
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def pa(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M - M.T)


def upsilon(M) -> np.ndarray:
    """vex of the antisymmetric part of ``M``."""
    M = np.asarray(M, dtype=float)
    return 0.5 * np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])


def attitude_distance(R) -> float:
    """Normalized distance ``Tr(I - R) / 4``, 0 at identity and 1 at half turns."""
    return 0.25 * (3.0 - float(np.trace(R)))


def psi(R) -> np.ndarray:
    return float(np.trace(R)) * I3 - np.asarray(R, dtype=float)


def is_rotation(R, tol: float = ORTHO_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return (
        np.linalg.norm(R @ R.T - I3) <= tol and abs(np.linalg.det(R) - 1.0) <= tol
    )


def orthonormality_drift(R) -> float:
    return float(np.linalg.norm(R @ R.T - I3))


def project_so3(R) -> np.ndarray:
    """Nearest rotation in the Frobenius sense (polar factor via SVD)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.linalg.det(U @ Vt)])
    return U @ D @ Vt


def renormalize(R, tol: float = RENORM_TOL) -> np.ndarray:
    """Re-project onto SO(3) only when the drift exceeds ``tol``."""
    if orthonormality_drift(R) > tol:
        return project_so3(R)
    return R


def _rodrigues_coeffs(theta: float) -> tuple[float, float]:
    # sin(t)/t, (1 - cos(t))/t^2
    if theta < _SMALL_ROT:
        t2 = theta * theta
        return 1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    s = math.sin(0.5 * theta) / (0.5 * theta)
    return math.sin(theta) / theta, 0.5 * s * s


def _jacobian_series(t2: float) -> tuple[float, float, float]:
    # sum_k (-t2)^k / (2k + n)! for n = 2, 3, 4, Horner form
    c1 = c2 = c3 = 0.0
    for k in range(_JAC_TERMS - 1, -1, -1):
        c1 = c1 * -t2 + 1.0 / math.factorial(2 * k + 2)
        c2 = c2 * -t2 + 1.0 / math.factorial(2 * k + 3)
        c3 = c3 * -t2 + 1.0 / math.factorial(2 * k + 4)
    return c1, c2, c3


def _jacobian_coeffs(theta: float) -> tuple[float, float, float]:
    # (1 - cos t)/t^2, (t - sin t)/t^3, (cos t - 1 + t^2/2)/t^4
    t2 = theta * theta
    if theta < _SMALL_JAC:
        return _jacobian_series(t2)
    half = math.sin(0.5 * theta) / (0.5 * theta)
    c1 = 0.5 * half * half
    c2 = (theta - math.sin(theta)) / (t2 * theta)
    c3 = (0.5 - c1) / t2
    return c1, c2, c3


def exp_so3(omega) -> np.ndarray:
    """Matrix exponential of ``hat(omega)`` (Rodrigues)."""
    omega = np.asarray(omega, dtype=float)
    theta = math.sqrt(float(omega @ omega))
    a, b = _rodrigues_coeffs(theta)
    K = hat(omega)
    return I3 + a * K + b * (K @ K)


def so3_left_jacobian(omega) -> np.ndarray:
    """``sum_n hat(omega)^n / (n+1)!``."""
    omega = np.asarray(omega, dtype=float)
    theta = math.sqrt(float(omega @ omega))
    c1, c2, _ = _jacobian_coeffs(theta)
    K = hat(omega)
    return I3 + c1 * K + c2 * (K @ K)


def so3_second_jacobian(omega) -> np.ndarray:
    """``sum_n hat(omega)^n / (n+2)!``."""
    omega = np.asarray(omega, dtype=float)
    theta = math.sqrt(float(omega @ omega))
    _, c2, c3 = _jacobian_coeffs(theta)
    K = hat(omega)
    return 0.5 * I3 + c2 * K + c3 * (K @ K)


@dataclass(frozen=True)
class TangentInput:
    """Element ``u(hat(omega), v_col, a_col, kappa)`` of the input algebra.

    As a 5x5 matrix::

        [[hat(omega), v_col, a_col],
         [0,          0,     0    ],
         [0,          kappa, 0    ]]
    """

    omega: np.ndarray
    v_col: np.ndarray
    a_col: np.ndarray
    kappa: float = 1.0

    def matrix(self) -> np.ndarray:
        U = np.zeros((5, 5))
        U[:3, :3] = hat(self.omega)
        U[:3, 3] = self.v_col
        U[:3, 4] = self.a_col
        U[4, 3] = self.kappa
        return U

    def scaled(self, c: float) -> "TangentInput":
        return TangentInput(
            c * np.asarray(self.omega, dtype=float),
            c * np.asarray(self.v_col, dtype=float),
            c * np.asarray(self.a_col, dtype=float),
            c * self.kappa,
        )


def exp_se23(u: TangentInput, dt: float) -> np.ndarray:
    """Closed-form ``expm(u.matrix() * dt)``.

    With ``A = hat(omega) dt`` the translational columns are
    ``J1 (v dt) + kappa dt J2 (a dt)`` and ``J1 (a dt)`` where ``J1``/``J2`` are
    the first and second SO(3) Jacobian series of ``A``.
    """
    if not dt > 0.0:
        raise PreconditionError("exp_se23: dt must be positive")
    w = np.asarray(u.omega, dtype=float) * dt
    theta = math.sqrt(float(w @ w))
    a, b = _rodrigues_coeffs(theta)
    c1, c2, c3 = _jacobian_coeffs(theta)
    K = hat(w)
    K2 = K @ K
    v = np.asarray(u.v_col, dtype=float) * dt
    acc = np.asarray(u.a_col, dtype=float) * dt
    kdt = u.kappa * dt
    J1 = I3 + c1 * K + c2 * K2
    J2 = 0.5 * I3 + c2 * K + c3 * K2
    E = np.eye(5)
    E[:3, :3] = I3 + a * K + b * K2
    E[:3, 3] = J1 @ v + kdt * (J2 @ acc)
    E[:3, 4] = J1 @ acc
    E[4, 3] = kdt
    return E


def expm_series(A, terms: int = 30) -> np.ndarray:
    """Truncated power series of the matrix exponential (test oracle)."""
    A = np.asarray(A, dtype=float)
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for n in range(1, terms):
        term = term @ A / n
        out = out + term
    return out


@dataclass(frozen=True)
class NavState:
    """Element of SE_2(3) held as its 5x5 navigation matrix."""

    matrix: np.ndarray

    @classmethod
    def from_parts(cls, R, P, V) -> "NavState":
        X = np.eye(5)
        X[:3, :3] = np.asarray(R, dtype=float).T
        X[:3, 3] = P
        X[:3, 4] = V
        return cls(X)

    @classmethod
    def identity(cls) -> "NavState":
        return cls(np.eye(5))

    @property
    def R(self) -> np.ndarray:
        return self.matrix[:3, :3].T

    @property
    def P(self) -> np.ndarray:
        return self.matrix[:3, 3].copy()

    @property
    def V(self) -> np.ndarray:
        return self.matrix[:3, 4].copy()

    def is_valid(self, tol: float = ORTHO_TOL) -> bool:
        X = self.matrix
        bottom = np.array([[0, 0, 0, 1, 0], [0, 0, 0, 0, 1]], dtype=float)
        return bool(np.allclose(X[3:], bottom, atol=tol, rtol=0.0)) and is_rotation(
            self.R, tol
        )

    def renormalized(self) -> "NavState":
        R = self.R
        Rn = renormalize(R)
        if Rn is R:
            return self
        return NavState.from_parts(Rn, self.P, self.V)


def nav_compose(A: NavState, B: NavState) -> NavState:
    return NavState(A.matrix @ B.matrix)


def nav_inverse(X: NavState) -> NavState:
    R = X.R
    return NavState.from_parts(R.T, -R @ X.P, -R @ X.V)


def quat_to_rot(q) -> np.ndarray:
    """Rotation from a unit quaternion ``[q0, q1, q2, q3]``.

    ``R = (q0^2 - |q|^2) I + 2 q q^T - 2 q0 hat(q)``, i.e. the inertial-to-body
    matrix of the attitude quaternion.
    """
    q = np.asarray(q, dtype=float)
    q0, qv = q[0], q[1:]
    return (q0 * q0 - qv @ qv) * I3 + 2.0 * np.outer(qv, qv) - 2.0 * q0 * hat(qv)


def identity_checks(N, omega, y, z) -> dict[str, float]:
    """Residuals of the trace and cross-product identities.

    ``trace``: ``Tr(N hat(w)) + 2 vex(Pa(N))^T w`` (also via ``Tr(Pa(N) hat(w))``).
    ``cross``: ``hat(y x z) - (z y^T - y z^T)``.
    """
    N = np.asarray(N, dtype=float)
    W = hat(omega)
    rhs = -2.0 * float(upsilon(N) @ np.asarray(omega, dtype=float))
    lhs = float(np.trace(N @ W))
    mid = float(np.trace(pa(N) @ W))
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    cross = hat(np.cross(y, z)) - (np.outer(z, y) - np.outer(y, z))
    return {
        "trace": abs(lhs - rhs),
        "trace_pa": abs(mid - rhs),
        "cross": float(np.max(np.abs(cross))),
    }


def lemma_bounds(R, M) -> tuple[float, float, float]:
    """``(lower, value, upper)`` of ``|Upsilon(R M)|^2`` against
    ``lambda_min(Mbar)^2 |R|_I`` and ``lambda_max(Mbar)^2 |R|_I``.
    """
    M = np.asarray(M, dtype=float)
    Mbar = float(np.trace(M)) * I3 - M
    ev = np.linalg.eigvalsh(Mbar)
    d = attitude_distance(R)
    u = upsilon(np.asarray(R) @ M)
    return ev[0] ** 2 * d, float(u @ u), ev[-1] ** 2 * d
