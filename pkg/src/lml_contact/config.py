"""Experiment configuration read from an INI-style key-value file.

Every section and key is optional; missing keys keep their defaults and
unknown sections or keys are rejected. Vectors are comma separated. Angles
in the file are in degrees (keys ending in ``_deg``); everything else is SI.
See ``docs/formats.md`` for the full schema.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .alignment_controller import ControllerConfig
from .errors import InvalidConfigError
from .experiments import CalibrationSettings, InsertionSettings
from .model_types import N_W, NoiseSpec, Pose, Wrench, rotation_from_rotvec
from .quasistatic_sim import SensorModel, SocketScene, default_sensor_covariance


def _vec(n):
    def parse(text: str):
        try:
            values = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
        except ValueError:
            raise InvalidConfigError(f"expected {n} comma separated numbers, got {text!r}") from None
        if len(values) != n:
            raise InvalidConfigError(f"expected {n} comma separated numbers, got {len(values)}")
        return tuple(values)

    return parse


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise InvalidConfigError(f"expected a boolean, got {text!r}")


def _optional_int(text: str):
    return None if text.strip().lower() in ("", "none", "off") else int(text)


def _optional_float(text: str):
    return None if text.strip().lower() in ("", "none", "off") else float(text)


def _weights(text: str):
    values = [float(v) for v in text.split(",") if v.strip()]
    if len(values) == 1:
        return values[0]
    if len(values) != N_W:
        raise InvalidConfigError(f"weights need 1 or {N_W} entries, got {len(values)}")
    return tuple(values)


SCHEMA = {
    "scene": {
        "contact_model": str,
        "clearance": float,
        "stiffness_lateral": float,
        "stiffness_rotational": float,
        "friction_insertion": float,
        "coupling_position": float,
        "coupling_rotation": float,
        "depth": float,
        "max_penetration": float,
        "settle_fraction": float,
        "socket_position": _vec(3),
        "socket_rotation_deg": _vec(3),
    },
    "sensor": {
        "force_std": float,
        "torque_std": float,
        "bias": _vec(6),
        "inject_noise": _bool,
    },
    "filter": {
        "b": _weights,
        "rho": _weights,
        "q": float,
        "prior_variance_cap": _optional_float,
        "regularize_interval": _optional_int,
    },
    "controller": {
        "selector": _vec(6),
        "lam": float,
        "mu": float,
        "box_pos": float,
        "box_rot_deg": float,
        "insertion_feed": float,
    },
    "calibration": {
        "duration_s": float,
        "rate_hz": float,
        "amplitude_pos": float,
        "amplitude_rot_deg": float,
    },
    "insertion": {
        "misalignment_pos": _vec(2),
        "misalignment_rot_deg": _vec(3),
        "start_height": float,
        "hold_depth": float,
        "hold_steps": int,
        "align_steps": int,
    },
    "experiment": {
        "seed": int,
    },
}


@dataclass
class ExperimentConfig:
    scene: dict = field(default_factory=dict)
    sensor: dict = field(default_factory=lambda: {
        "force_std": 0.05, "torque_std": 0.005, "bias": (0.0,) * 6, "inject_noise": True,
    })
    filter: dict = field(default_factory=lambda: {
        "b": 1e-6, "rho": 0.0, "q": 0.0, "prior_variance_cap": 1e6, "regularize_interval": None,
    })
    controller: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    insertion: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=lambda: {"seed": 0})

    def set(self, section: str, key: str, value):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise InvalidConfigError(f"unknown configuration key [{section}] {key}")
        getattr(self, section)[key] = value

    @property
    def seed(self) -> int:
        return self.experiment["seed"]

    def build_scene(self) -> SocketScene:
        opts = dict(self.scene)
        position = opts.pop("socket_position", (0.0, 0.0, 0.0))
        rotation = np.deg2rad(opts.pop("socket_rotation_deg", (0.0, 0.0, 0.0)))
        try:
            return SocketScene(socket_pose=Pose(position, rotation_from_rotvec(rotation)), **opts)
        except (TypeError, ValueError) as exc:
            raise InvalidConfigError(str(exc)) from None

    def sensor_covariance(self) -> np.ndarray:
        s = self.sensor
        if not (s["force_std"] > 0 and s["torque_std"] > 0):
            raise InvalidConfigError("sensor standard deviations must be positive")
        return default_sensor_covariance(s["force_std"], s["torque_std"])

    def build_sensor(self) -> SensorModel:
        R = self.sensor_covariance() if self.sensor["inject_noise"] else np.zeros((6, 6))
        bias = Wrench.from_vector(np.array(self.sensor["bias"]))
        return SensorModel(R, bias, seed=self.seed)

    def build_noise(self) -> NoiseSpec:
        f = self.filter
        try:
            return NoiseSpec.create(
                self.sensor_covariance(), N_W, b=f["b"], rho=f["rho"], q=f["q"],
                prior_variance_cap=f["prior_variance_cap"],
            )
        except ValueError as exc:
            raise InvalidConfigError(str(exc)) from None

    def build_controller(self) -> ControllerConfig:
        opts = dict(self.controller)
        if "box_rot_deg" in opts:
            opts["box_rot"] = float(np.deg2rad(opts.pop("box_rot_deg")))
        try:
            return ControllerConfig(**opts)
        except (TypeError, ValueError) as exc:
            raise InvalidConfigError(str(exc)) from None

    def build_calibration(self) -> CalibrationSettings:
        opts = dict(self.calibration)
        if "amplitude_rot_deg" in opts:
            opts["amplitude_rot"] = float(np.deg2rad(opts.pop("amplitude_rot_deg")))
        return CalibrationSettings(seed=self.seed, **opts)

    def build_insertion(self, misalignment=None) -> InsertionSettings:
        opts = dict(self.insertion)
        if "misalignment_rot_deg" in opts:
            opts["misalignment_rot"] = tuple(np.deg2rad(opts.pop("misalignment_rot_deg")))
        settings = InsertionSettings(**opts)
        if misalignment is not None:
            settings = replace(settings, misalignment_pos=misalignment[0], misalignment_rot=misalignment[1])
        return settings


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise InvalidConfigError(f"{source}: {exc}") from None
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in SCHEMA:
            raise InvalidConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise InvalidConfigError(f"{source}: unknown key [{section}] {key}")
            try:
                value = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise InvalidConfigError(f"{source}: [{section}] {key}: {exc}") from None
            cfg.set(section, key, value)
    return cfg


def load_config(path=None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))
