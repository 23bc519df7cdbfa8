"""Quick identity and oracle checks, runnable without pytest (``vtolnav selftest``)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .guidance import (
    GuidanceGains,
    ThetaState,
    extract_attitude,
    intermediary_force,
    omega_d,
    reference_trajectory,
)
from .liegroup import (
    NavState,
    TangentInput,
    attitude_distance,
    exp_se23,
    exp_so3,
    expm_series,
    hat,
    identity_checks,
    lemma_bounds,
    nav_compose,
    nav_inverse,
    quat_to_rot,
    upsilon,
    vex,
)
from .measurement import (
    aggregate_arrays,
    controller_innovation,
    ground_truth_rm,
    observer_innovations,
    synthesize_measurements,
)
from .quaternion import rot_to_quat


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str
    # informational checks are reported but do not change the exit status
    informational: bool = False


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation (normalized Gaussian quaternion)."""
    q = rng.standard_normal(4)
    return quat_to_rot(q / np.linalg.norm(q))


def random_landmarks(rng: np.random.Generator, n: int = 5):
    pts = rng.uniform(-3.0, 3.0, size=(n, 3))
    w = rng.uniform(0.5, 2.0, size=n)
    return aggregate_arrays(pts, w)


def _check_hat_vex(rng) -> CheckResult:
    err = 0.0
    for _ in range(1000):
        w = rng.standard_normal(3) * 5.0
        err = max(err, float(np.max(np.abs(vex(hat(w)) - w))))
    ok = err == 0.0 and np.array_equal(hat([1, 2, 3]), [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])
    return CheckResult("hat/vex round trip", ok, f"max err {err:.1e}")


def _check_exp(rng) -> CheckResult:
    err = 0.0
    for _ in range(300):
        d = rng.standard_normal(3)
        w = d / np.linalg.norm(d) * rng.uniform(0.0, np.pi)
        err = max(err, float(np.max(np.abs(exp_so3(w) - expm_series(hat(w))))))
        u = TangentInput(w, rng.standard_normal(3), rng.standard_normal(3), rng.uniform(-1.0, 1.0))
        err = max(err, float(np.max(np.abs(exp_se23(u, 1.0) - expm_series(u.matrix())))))
    return CheckResult("closed-form exp vs series", err < 1e-12, f"max err {err:.1e}")


def _check_identities(rng) -> CheckResult:
    err = 0.0
    for _ in range(1000):
        r = identity_checks(rng.standard_normal((3, 3)), rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3))
        err = max(err, *r.values())
        R = random_rotation(rng)
        d = attitude_distance(R)
        u = upsilon(R)
        err = max(err, abs(float(u @ u) - 4.0 * (1.0 - d) * d))
    return CheckResult("trace/cross/upsilon identities", err < 1e-12, f"max residual {err:.1e}")


def _lemma_samples(rng, n=1000):
    out = []
    for _ in range(n):
        A = rng.standard_normal((3, 3))
        out.append(lemma_bounds(random_rotation(rng), A @ A.T))
    return out


def _check_lemma_upper(rng) -> CheckResult:
    worst = max(v - hi for _, v, hi in _lemma_samples(rng))
    return CheckResult("upsilon(RM) upper bound", bool(worst <= 1e-12), f"max excess {worst:.1e}")


def _check_lemma_lower(rng) -> CheckResult:
    worst = max(lo - v for lo, v, _ in _lemma_samples(rng))
    return CheckResult(
        "upsilon(RM) lower bound, printed form",
        bool(worst <= 1e-12),
        f"max violation {worst:.3g} (known counterexample: M = I, any R != I)",
        informational=True,
    )


def _check_nav(rng) -> CheckResult:
    err = 0.0
    for _ in range(500):
        X = NavState.from_parts(random_rotation(rng), rng.standard_normal(3), rng.standard_normal(3))
        err = max(err, float(np.max(np.abs(nav_compose(X, nav_inverse(X)).matrix - np.eye(5)))))
        err = max(err, float(np.max(np.abs(nav_inverse(X).matrix - np.linalg.inv(X.matrix)))))
    return CheckResult("SE_2(3) inverse", err < 1e-12, f"max err {err:.1e}")


def _check_innovations(rng) -> CheckResult:
    err = 0.0
    for _ in range(300):
        fs = random_landmarks(rng)
        R, R_hat, R_d = random_rotation(rng), random_rotation(rng), random_rotation(rng)
        P, P_hat = rng.standard_normal(3), rng.standard_normal(3)
        meas = synthesize_measurements(R, P, fs)
        inn = observer_innovations(R_hat, P_hat, meas, fs)
        R_t = R_hat.T @ R
        err = max(err, float(np.max(np.abs(inn.ups_o - upsilon(ground_truth_rm(R_t, fs))))))
        y_ref = fs.s_total * (P_hat - R_t @ P) + fs.s_total * (R_t - np.eye(3)) @ fs.p_c
        err = max(err, float(np.max(np.abs(inn.y_err_sum - y_ref))))
        ups_c = controller_innovation(R_d, meas, fs)
        err = max(err, float(np.max(np.abs(ups_c - upsilon(R_d.T @ R @ fs.M)))))
    return CheckResult("measurement innovations vs ground truth", err < 1e-12, f"max err {err:.1e}")


def _check_quaternion(rng) -> CheckResult:
    err = 0.0
    for _ in range(1000):
        R = random_rotation(rng)
        err = max(err, float(np.max(np.abs(quat_to_rot(rot_to_quat(R)) - R))))
    return CheckResult("quaternion round trip", err < 1e-12, f"max err {err:.1e}")


def _check_guidance(rng) -> CheckResult:
    # desired attitude along the reference: Rdot_d = -hat(Omega_d) R_d to O(h^2)
    gains = GuidanceGains()
    st = ThetaState.zero()
    h = 1e-5
    err = 0.0
    for t in rng.uniform(0.0, 50.0, size=20):
        def R_of(s):
            return extract_attitude(intermediary_force(reference_trajectory(s), st, gains), 3.0, 9.81)[2]

        F = intermediary_force(reference_trajectory(t), st, gains)
        F_dot = reference_trajectory(t).P_d_3
        R_dot = (R_of(t + h) - R_of(t - h)) / (2.0 * h)
        err = max(err, float(np.linalg.norm(R_dot + hat(omega_d(F, F_dot, 9.81)) @ R_of(t))))
    return CheckResult("desired rate consistency", err < 1e-8, f"max residual {err:.1e}")


CHECKS: tuple[Callable[[np.random.Generator], CheckResult], ...] = (
    _check_hat_vex,
    _check_exp,
    _check_identities,
    _check_lemma_upper,
    _check_lemma_lower,
    _check_nav,
    _check_innovations,
    _check_quaternion,
    _check_guidance,
)


def run_selftest(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [check(rng) for check in CHECKS]
