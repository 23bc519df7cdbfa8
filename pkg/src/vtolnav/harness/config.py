"""Scenario configuration: schema, defaults and YAML round trip."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError, model_validator

from ..liegroup import project_so3

Vec3 = tuple[float, float, float]
Mat3 = tuple[Vec3, Vec3, Vec3]

# Initial attitude as printed (4 decimals); projected onto SO(3) when used.
DEFAULT_R0: Mat3 = (
    (0.5763, -0.7638, 0.2907),
    (0.8147, 0.5085, -0.2789),
    (0.0652, 0.3976, 0.9153),
)

DEFAULT_LANDMARKS: tuple[Vec3, ...] = (
    (2.5, 1.5, 4.0),
    (-2.0, 2.5, 5.5),
    (-2.5, -2.0, 7.0),
    (2.0, -2.5, 8.0),
    (0.5, 0.0, 9.5),
)

# Constant measurement bias, 0.1 m on every axis of every landmark vector.
DEFAULT_MEAS_BIAS: tuple[Vec3, ...] = ((0.1, 0.1, 0.1),) * len(DEFAULT_LANDMARKS)


class ConfigError(ValueError):
    """Invalid scenario configuration; ``errors`` lists ``(field, message)`` pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        lines = "\n".join(f"  {f}: {m}" for f, m in errors)
        super().__init__(f"invalid scenario configuration:\n{lines}")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PlantSection(_Section):
    m: PositiveFloat = 3.0
    J: Mat3 = ((0.15, 0.0, 0.0), (0.0, 0.23, 0.0), (0.0, 0.0, 0.16))
    g: float = 9.81
    b_omega_true: Vec3 = (0.1, -0.1, 0.05)

    @model_validator(mode="after")
    def _check_inertia(self):
        J = np.array(self.J)
        if not np.allclose(J, J.T) or np.linalg.eigvalsh(J)[0] <= 0.0:
            raise ValueError("J must be symmetric positive definite")
        return self


class LandmarkSection(_Section):
    points: tuple[Vec3, ...] = DEFAULT_LANDMARKS
    weights: Optional[tuple[PositiveFloat, ...]] = None

    @model_validator(mode="after")
    def _check_count(self):
        if len(self.points) < 3:
            raise ValueError("at least 3 landmarks are required")
        if self.weights is not None and len(self.weights) != len(self.points):
            raise ValueError("weights must match the number of landmarks")
        return self

    def weight_array(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(len(self.points))
        return np.array(self.weights, dtype=float)


class MeasurementSection(_Section):
    noise_std: float = Field(0.07, ge=0.0)
    bias: Optional[tuple[Vec3, ...]] = DEFAULT_MEAS_BIAS
    gyro_noise_std: float = Field(0.0, ge=0.0)


class ObserverSection(_Section):
    gamma_o: PositiveFloat = 0.7
    k_o1: PositiveFloat = 11.0
    k_o2: PositiveFloat = 10.0
    k_o3: PositiveFloat = 4.0


class ControllerSection(_Section):
    k_theta1: PositiveFloat = 1.2
    k_theta2: PositiveFloat = 1.2
    k_c1: PositiveFloat = 1.0
    k_c2: PositiveFloat = 4.0
    k_c3: PositiveFloat = 4.0
    k_c4: PositiveFloat = 2.0


class InitialTruth(_Section):
    R: Mat3 = DEFAULT_R0
    Omega: Vec3 = (0.0, 0.0, 0.0)
    P: Vec3 = (-1.0, -1.0, 0.0)
    V: Vec3 = (1.0, 1.0, 0.0)


class InitialEstimate(_Section):
    R: Mat3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    P: Vec3 = (0.0, 0.0, 0.0)
    V: Vec3 = (0.0, 0.0, 0.0)
    b_omega: Vec3 = (0.0, 0.0, 0.0)
    theta: Vec3 = (0.0, 0.0, 0.0)
    theta_dot: Vec3 = (0.0, 0.0, 0.0)


class ScenarioConfig(_Section):
    duration: PositiveFloat = 50.0
    dt: PositiveFloat = 1e-3
    trajectory: Literal["default", "hover"] = "default"
    hover_point: Vec3 = (0.0, 0.0, 5.0)
    backend: Literal["rotation", "quaternion"] = "rotation"
    seed: int = 0
    log_every: int = Field(1, ge=1)
    output: Optional[str] = None
    plant: PlantSection = PlantSection()
    landmarks: LandmarkSection = LandmarkSection()
    measurement: MeasurementSection = MeasurementSection()
    observer: ObserverSection = ObserverSection()
    controller: ControllerSection = ControllerSection()
    initial_truth: InitialTruth = InitialTruth()
    initial_estimate: InitialEstimate = InitialEstimate()

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.duration < self.dt:
            raise ValueError("duration must be at least dt")
        bias = self.measurement.bias
        if bias is not None and len(bias) != len(self.landmarks.points):
            raise ValueError("measurement.bias must have one vector per landmark")
        return self

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.duration / self.dt)))

    def truth_rotation(self) -> np.ndarray:
        return project_so3(np.array(self.initial_truth.R, dtype=float))

    def estimate_rotation(self) -> np.ndarray:
        return project_so3(np.array(self.initial_estimate.R, dtype=float))

    def with_updates(self, updates: dict) -> "ScenarioConfig":
        """Copy with dotted-path overrides, e.g. ``{"observer.k_o1": 5.0}``."""
        data = self.model_dump(mode="json")
        for key, value in updates.items():
            node = data
            parts = key.split(".")
            for part in parts[:-1]:
                if not isinstance(node, dict) or part not in node:
                    raise ConfigError([(key, "unknown field")])
                node = node[part]
            if not isinstance(node, dict) or parts[-1] not in node:
                raise ConfigError([(key, "unknown field")])
            node[parts[-1]] = value
        return validate_config(data)


def _format_errors(exc: ValidationError) -> list[tuple[str, str]]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        out.append((loc, err["msg"]))
    return out


def validate_config(data: dict | None) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data or {})
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([("<file>", f"not valid YAML: {exc}")]) from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError([("<root>", "top level must be a mapping")])
    return validate_config(data)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")
