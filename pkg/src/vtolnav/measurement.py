"""Landmark measurements and the direct aggregates fed to observer and controller."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ObservabilityError(ValueError):
    """Landmark set cannot determine attitude and position (n < 3 or collinear)."""


@dataclass(frozen=True)
class Feature:
    p: np.ndarray
    s: float = 1.0

    def __post_init__(self):
        if not self.s > 0.0:
            raise ValueError(f"feature weight must be positive, got {self.s}")


@dataclass(frozen=True)
class FeatureSet:
    """Static landmark set with cached weighted aggregates.

    ``points`` is ``(n, 3)``, ``weights`` is ``(n,)``. ``s_total``, ``p_c``,
    ``M`` and ``M_bar`` are computed once by :func:`aggregate`.
    """

    points: np.ndarray
    weights: np.ndarray
    s_total: float
    p_c: np.ndarray
    M: np.ndarray
    M_bar: np.ndarray
    # centred landmarks scaled by s_i / 2, used by the innovation sums
    _half_centred: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def features(self) -> list[Feature]:
        return [Feature(p.copy(), float(s)) for p, s in zip(self.points, self.weights)]

    def scaled(self, c: float) -> "FeatureSet":
        return aggregate_arrays(self.points, self.weights * c)


def aggregate_arrays(points, weights, rank_tol: float = 1e-9) -> FeatureSet:
    points = np.array(points, dtype=float).reshape(-1, 3)
    weights = np.array(weights, dtype=float).reshape(-1)
    n = len(points)
    if n < 3:
        raise ObservabilityError(f"need at least 3 landmarks, got {n}")
    if len(weights) != n:
        raise ValueError("points and weights differ in length")
    if np.any(weights <= 0.0):
        raise ValueError("landmark weights must be positive")
    s_total = float(weights.sum())
    p_c = weights @ points / s_total
    M = (points.T * weights) @ points - s_total * np.outer(p_c, p_c)
    M = 0.5 * (M + M.T)
    ev = np.linalg.eigvalsh(M)
    if ev[1] <= rank_tol * max(1.0, ev[2]):
        raise ObservabilityError("landmarks are collinear: rank(M) < 2")
    M_bar = float(np.trace(M)) * np.eye(3) - M
    half_centred = 0.5 * weights[:, None] * (points - p_c)
    return FeatureSet(points, weights, s_total, p_c, M, M_bar, half_centred)


def aggregate(features: Sequence[Feature]) -> FeatureSet:
    return aggregate_arrays([f.p for f in features], [f.s for f in features])


@dataclass(frozen=True)
class BodyMeasurements:
    timestamp: float
    y: np.ndarray  # (n, 3) body-frame landmark vectors
    omega_m: np.ndarray


@dataclass(frozen=True)
class Innovations:
    ups_o: np.ndarray
    y_err_sum: np.ndarray


def synthesize_measurements(
    R,
    P,
    fs: FeatureSet,
    bias=None,
    noise_std: float = 0.0,
    rng_seed=None,
    *,
    omega_m=None,
    timestamp: float = 0.0,
    rng: np.random.Generator | None = None,
) -> BodyMeasurements:
    """``y_i = R (p_i - P) + b_i + nu_i`` with ``nu_i ~ N(0, noise_std^2)`` per axis.

    Either pass ``rng_seed`` for a one-off draw or ``rng`` to continue a
    generator owned by the caller.
    """
    R = np.asarray(R, dtype=float)
    y = (fs.points - np.asarray(P, dtype=float)) @ R.T
    if bias is not None:
        y = y + np.asarray(bias, dtype=float).reshape(-1, 3)
    if noise_std > 0.0:
        gen = rng if rng is not None else np.random.default_rng(rng_seed)
        y = y + gen.normal(0.0, noise_std, size=y.shape)
    om = np.zeros(3) if omega_m is None else np.asarray(omega_m, dtype=float)
    return BodyMeasurements(timestamp, y, om)


def _rotated_measurements(R_ref, meas: BodyMeasurements) -> np.ndarray:
    # rows are R_ref^T y_i
    return meas.y @ np.asarray(R_ref, dtype=float)


def observer_innovations(
    R_hat, P_hat, meas: BodyMeasurements, fs: FeatureSet
) -> Innovations:
    if len(meas.y) != len(fs):
        raise ValueError("measurement count does not match landmark count")
    ry = _rotated_measurements(R_hat, meas)
    ups = np.cross(fs._half_centred, ry).sum(axis=0)
    y_err = fs.weights @ (np.asarray(P_hat, dtype=float) + ry - fs.points)
    return Innovations(ups, y_err)


def controller_innovation(R_d, meas: BodyMeasurements, fs: FeatureSet) -> np.ndarray:
    if len(meas.y) != len(fs):
        raise ValueError("measurement count does not match landmark count")
    ry = _rotated_measurements(R_d, meas)
    return np.cross(fs._half_centred, ry).sum(axis=0)


def position_error_from_innovation(y_err_sum, R_tilde, fs: FeatureSet) -> np.ndarray:
    """Recover ``P_hat - R_tilde P`` from the weighted measurement residual."""
    return np.asarray(y_err_sum) / fs.s_total - (np.asarray(R_tilde) - np.eye(3)) @ fs.p_c


def ground_truth_rm(R_tilde, fs: FeatureSet) -> np.ndarray:
    """``R_tilde M`` built without measurements (oracle side)."""
    return np.asarray(R_tilde) @ fs.M


def measured_rm(R_ref, meas: BodyMeasurements, fs: FeatureSet) -> np.ndarray:
    """``sum s_i R_ref^T y_i (p_i - p_c)^T`` from measurements."""
    ry = _rotated_measurements(R_ref, meas)
    return (ry.T * fs.weights) @ (fs.points - fs.p_c)

