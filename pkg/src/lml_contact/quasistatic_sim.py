"""Quasi-static plug-in-socket plant with an impedance-controlled end effector.

The plant has no velocity state. Each control period the end effector moves a
fixed fraction of the way toward its impedance set point and is then projected
back inside the socket's admissible region. Contact wrenches are expressed in
the socket frame and depend only on the current pose and the applied command:

* lateral spring on the plug offset from the socket axis, either everywhere
  (``linear``) or only beyond the clearance (``piecewise_clearance``);
* rotational spring on the attitude error relative to the socket;
* a constant force ``-friction_insertion`` along the socket z axis;
* impedance coupling ``-coupling_position * (r_des - r)`` and
  ``-coupling_rotation * phi``: pushing the set point into the wall loads it.

All of this is only active while the plug is below the socket mouth
(negative z in the socket frame). With the ``linear`` model the engaged wrench
is exactly ``G_true @ feature_map(pose, cmd)``; see :func:`true_model_matrix`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ExcitationError, InvalidConfigError, InvalidInputError
from .model_types import (
    BIAS,
    N_W,
    N_Y,
    PHI,
    POSITION,
    R_DES,
    ControlCommand,
    Pose,
    Wrench,
    axis_angle_between,
    log_rotation,
    orthonormalize,
    rotation_from_rotvec,
    vee,
)

CONTACT_MODELS = ("linear", "piecewise_clearance")

# incommensurate base frequencies (Hz) for the six command channels
CALIBRATION_FREQUENCIES = np.array([0.37, 0.53, 0.71, 0.89, 1.13, 1.31])
MAX_EXCITATION_CONDITION = 1e6


@dataclass(frozen=True)
class SocketScene:
    socket_pose: Pose = field(default_factory=lambda: Pose(np.zeros(3)))
    clearance: float = 5e-4
    stiffness_lateral: float = 500.0
    stiffness_rotational: float = 5.0
    friction_insertion: float = 2.0
    contact_model: str = "piecewise_clearance"
    coupling_position: float = 500.0
    coupling_rotation: float = 5.0
    depth: float = 0.04
    max_penetration: float = 0.02
    settle_fraction: float = 0.5

    def __post_init__(self):
        if self.contact_model not in CONTACT_MODELS:
            raise InvalidConfigError(f"contact_model must be one of {CONTACT_MODELS}, got {self.contact_model!r}")
        for name in ("clearance", "stiffness_lateral", "stiffness_rotational", "coupling_position",
                     "coupling_rotation", "friction_insertion"):
            if not getattr(self, name) >= 0:
                raise InvalidConfigError(f"{name} must be nonnegative")
        if not self.depth > 0 or not self.max_penetration > 0:
            raise InvalidConfigError("depth and max_penetration must be positive")
        if not 0 < self.settle_fraction <= 1:
            raise InvalidConfigError("settle_fraction must lie in (0, 1]")

    def to_socket(self, r: np.ndarray) -> np.ndarray:
        """Position expressed in the socket frame."""
        return self.socket_pose.R.T @ (r - self.socket_pose.r)

    def from_socket(self, p: np.ndarray) -> np.ndarray:
        return self.socket_pose.r + self.socket_pose.R @ p

    @property
    def lateral_limit(self) -> float:
        if self.contact_model == "linear":
            return self.max_penetration
        return self.clearance + self.max_penetration


@dataclass(frozen=True)
class PlantState:
    pose: Pose
    command: ControlCommand | None = None
    violations: int = 0


@dataclass(frozen=True)
class SensorModel:
    """Additive Gaussian noise plus a constant bias.

    ``R_sensor`` may be singular (including all zeros for a noiseless sensor).
    Noise for sample ``step`` is drawn from a Philox stream keyed by
    ``(seed, step)``, so any sample can be reproduced in isolation.
    """

    R_sensor: np.ndarray = field(default_factory=lambda: default_sensor_covariance())
    bias: Wrench = field(default_factory=Wrench.zero)
    seed: int = 0

    def __post_init__(self):
        R = np.array(self.R_sensor, dtype=np.float64)
        if R.shape != (N_Y, N_Y) or not np.all(np.isfinite(R)):
            raise InvalidConfigError("sensor covariance must be a finite 6x6 matrix")
        if not np.allclose(R, R.T):
            raise InvalidConfigError("sensor covariance must be symmetric")
        vals, vecs = np.linalg.eigh(0.5 * (R + R.T))
        if vals.min() < -1e-12 * max(1.0, vals.max()):
            raise InvalidConfigError("sensor covariance must be positive semidefinite")
        R.setflags(write=False)
        object.__setattr__(self, "R_sensor", R)
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
        factor.setflags(write=False)
        object.__setattr__(self, "_factor", factor)
        if self.seed < 0:
            raise InvalidConfigError("seed must be nonnegative")


def default_sensor_covariance(force_std: float = 0.05, torque_std: float = 0.005) -> np.ndarray:
    return np.diag([force_std**2] * 3 + [torque_std**2] * 3)


def _lateral_penetration(lateral: np.ndarray, scene: SocketScene) -> np.ndarray:
    if scene.contact_model == "linear":
        return lateral
    return np.sign(lateral) * np.maximum(np.abs(lateral) - scene.clearance, 0.0)


def is_engaged(pose: Pose, scene: SocketScene) -> bool:
    return bool(scene.to_socket(pose.r)[2] < 0.0)


def plant_step(state: PlantState, cmd: ControlCommand, scene: SocketScene) -> PlantState:
    """Settle a fraction of the way toward the command, then enforce the socket walls."""
    alpha = scene.settle_fraction
    pose = state.pose
    r = pose.r + alpha * (cmd.r_des - pose.r)
    R = orthonormalize(pose.R @ rotation_from_rotvec(alpha * cmd.phi))

    violations = state.violations
    p = scene.to_socket(r)
    if p[2] < 0.0:
        limit = scene.lateral_limit
        if np.any(np.abs(p[:2]) > limit):
            # the command would tear the plug through the socket wall
            p[:2] = np.clip(p[:2], -limit, limit)
            violations += 1
        p[2] = max(p[2], -scene.depth)
        r = scene.from_socket(p)
    return PlantState(Pose(r, R), cmd, violations)


def true_wrench(state: PlantState, cmd: ControlCommand, scene: SocketScene) -> Wrench:
    """Noise-free contact wrench in the socket frame for ``cmd`` applied at ``state``."""
    pose = state.pose
    p = scene.to_socket(pose.r)
    if p[2] >= 0.0:
        return Wrench.zero()
    Rs = scene.socket_pose.R
    M = Rs.T @ pose.R
    if scene.contact_model == "linear":
        misalignment = vee(M)
    else:
        misalignment = log_rotation(M)
    push = Rs.T @ (cmd.r_des - pose.r)

    f = -scene.coupling_position * push
    f[:2] -= scene.stiffness_lateral * _lateral_penetration(p[:2], scene)
    f[2] -= scene.friction_insertion
    tau = -scene.stiffness_rotational * misalignment - scene.coupling_rotation * cmd.phi
    return Wrench(f, tau)


def true_model_matrix(scene: SocketScene, sensor: SensorModel | None = None) -> np.ndarray:
    """The 6x19 matrix reproducing the engaged wrench of a ``linear`` scene (plus sensor bias)."""
    Rs = scene.socket_pose.R
    G = np.zeros((N_Y, N_W))
    k_lat, k_c = scene.stiffness_lateral, scene.coupling_position

    # forces: -k_lat * (Rs^T (r - rs))[:2] - k_c * Rs^T (r_des - r) - friction * e_z
    G[0:3, POSITION] += k_c * Rs.T
    G[0:3, R_DES] -= k_c * Rs.T
    G[0:2, POSITION] -= k_lat * Rs.T[:2]
    G[0:2, BIAS] += k_lat * (Rs.T @ scene.socket_pose.r)[:2]
    G[2, BIAS] -= scene.friction_insertion

    # torques: -k_rot * vee(Rs^T R) - k_cr * phi, with vec(R)[c + 3b] = R[c, b]
    def dM(a, b):
        row = np.zeros(9)
        for c in range(3):
            row[c + 3 * b] = Rs[c, a]
        return row

    dvee = 0.5 * np.array([dM(2, 1) - dM(1, 2), dM(0, 2) - dM(2, 0), dM(1, 0) - dM(0, 1)])
    G[3:6, 3:12] = -scene.stiffness_rotational * dvee
    G[3:6, PHI] = -scene.coupling_rotation * np.eye(3)

    if sensor is not None:
        G[:, BIAS] += sensor.bias.as_vector()
    return G


def sensor_noise(sensor: SensorModel, step: int) -> np.ndarray:
    key = np.array([sensor.seed, step], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return sensor._factor @ rng.standard_normal(N_Y)


def measure(sensor: SensorModel, true_w: Wrench, step: int = 0) -> Wrench:
    """Sensor reading for sample index ``step``."""
    if step < 0:
        raise InvalidInputError("step must be nonnegative")
    return Wrench.from_vector(true_w.as_vector() + sensor.bias.as_vector() + sensor_noise(sensor, step))


def calibration_trajectory(
    duration_s: float = 10.0,
    rate_hz: float = 100.0,
    amplitude_pos: float = 0.01,
    amplitude_rot: float = np.deg2rad(3.0),
    seed: int = 0,
    center: Pose | None = None,
) -> list[ControlCommand]:
    """Lissajous excitation of all six command channels around ``center``.

    ``r_des`` is absolute; ``phi`` is the target attitude offset from
    ``center.R`` (use :func:`track_target` to turn it into a correction
    relative to the current attitude). Each channel is a sinusoid with its
    own incommensurate frequency and a seeded phase.

    Raises :class:`ExcitationError` if there are fewer samples than features
    or the unit-normalized Gram matrix of ``[r_des, phi, 1]`` has condition
    number above 1e6.
    """
    n = int(round(duration_s * rate_hz))
    if n < N_W:
        raise ExcitationError(f"{n} samples cannot identify {N_W} features")
    if center is None:
        center = Pose(np.zeros(3))
    rng = np.random.default_rng(seed)
    freqs = CALIBRATION_FREQUENCIES * (1.0 + 0.05 * rng.random(6))
    phases = rng.uniform(0.0, 2.0 * np.pi, 6)
    t = np.arange(n) / rate_hz
    waves = np.sin(2.0 * np.pi * freqs[None, :] * t[:, None] + phases[None, :])
    offsets = waves * np.array([amplitude_pos] * 3 + [amplitude_rot] * 3)

    design = np.column_stack([offsets, np.ones(n)])
    scale = np.sqrt(np.mean(design**2, axis=0))
    if np.any(scale == 0):
        raise ExcitationError("calibration amplitudes must be nonzero on every channel")
    gram = (design / scale).T @ (design / scale)
    cond = np.linalg.cond(gram)
    if not cond <= MAX_EXCITATION_CONDITION:
        raise ExcitationError(f"calibration excitation is degenerate (Gram condition number {cond:.3g})")

    return [ControlCommand(center.r + o[:3], o[3:]) for o in offsets]


def track_target(pose: Pose, target: ControlCommand, center: Pose) -> ControlCommand:
    """Command toward ``target`` whose ``phi`` is an attitude offset from ``center``."""
    R_target = center.R @ rotation_from_rotvec(target.phi)
    return ControlCommand(target.r_des, axis_angle_between(pose.R, R_target))


def misaligned_start(scene: SocketScene, lateral, rotation, height: float = 0.005) -> Pose:
    """Pose above the socket mouth offset by ``lateral`` (m, xy) and ``rotation`` (rotvec, rad)."""
    lateral = np.asarray(lateral, dtype=np.float64)
    p = np.array([lateral[0], lateral[1], height])
    R = scene.socket_pose.R @ rotation_from_rotvec(rotation)
    return Pose(scene.from_socket(p), R)


def with_contact_model(scene: SocketScene, model: str) -> SocketScene:
    return replace(scene, contact_model=model)
