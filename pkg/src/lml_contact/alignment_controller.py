"""Convex alignment policy on top of a learned linear wrench model.

For a fixed pose the predicted wrench is affine in the command,
``y_hat = G_u @ u + c``, so the policy

    minimize  |S y_hat|^2 + lam |r - r_des|^2 + mu |phi|^2

is an unconstrained least-squares problem with a 6x6 positive definite
Hessian. It is solved in closed form and the result is clipped to the boxes
``|r - r_des|_inf <= box_pos`` and ``|phi|_inf <= box_rot``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InvalidConfigError, InvalidInputError, InvariantViolation
from .model_types import BIAS, CONTROL, N_W, N_Y, POSITION, ROTATION, ControlCommand, Pose, Wrench, feature_map
from .quasistatic_sim import PlantState, SensorModel, SocketScene, measure, plant_step, true_wrench
from .trace import PHASE_CONTROLLER, PHASE_SCRIPTED, EpisodeTrace


@dataclass(frozen=True)
class ControllerConfig:
    selector: tuple = (1, 1, 0, 1, 1, 1)
    lam: float = 10.0
    mu: float = 10.0
    box_pos: float = 0.01
    box_rot: float = float(np.deg2rad(3.0))
    insertion_feed: float = 2e-4

    def __post_init__(self):
        sel = tuple(int(s) for s in self.selector)
        if len(sel) != N_Y or any(s not in (0, 1) for s in sel):
            raise InvalidConfigError("selector must hold six entries from {0, 1}")
        object.__setattr__(self, "selector", sel)
        if not (self.lam > 0 and self.mu > 0):
            raise InvalidConfigError("lam and mu must be positive")
        if not (self.box_pos > 0 and self.box_rot > 0):
            raise InvalidConfigError("box bounds must be positive")
        if not self.insertion_feed >= 0:
            raise InvalidConfigError("insertion_feed must be nonnegative")

    @property
    def S(self) -> np.ndarray:
        return np.diag(np.array(self.selector, dtype=np.float64))


def _check_model(G_tilde) -> np.ndarray:
    G = np.asarray(G_tilde, dtype=np.float64)
    if G.shape != (N_Y, N_W):
        raise InvalidInputError(f"model must be {N_Y}x{N_W}, got {G.shape}")
    if not np.all(np.isfinite(G)):
        raise InvalidInputError("model contains non-finite entries")
    return G


def alignment_objective(G_tilde, pose: Pose, cfg: ControllerConfig):
    """Affine pieces of the policy in the increment ``u = (r_des - r, phi)``.

    Returns ``(G_u, c)`` with ``y_hat = G_u @ u + c``.
    """
    G = _check_model(G_tilde)
    G_u = G[:, CONTROL]
    c = G[:, POSITION] @ pose.r + G[:, ROTATION] @ pose.R.ravel(order="F") + G[:, BIAS]
    c = c + G_u[:, :3] @ pose.r
    return G_u, c


def predicted_cost(G_tilde, pose: Pose, cfg: ControllerConfig, u) -> float:
    G_u, c = alignment_objective(G_tilde, pose, cfg)
    u = np.asarray(u, dtype=np.float64)
    y = np.array(cfg.selector) * (G_u @ u + c)
    return float(y @ y + cfg.lam * u[:3] @ u[:3] + cfg.mu * u[3:] @ u[3:])


def unconstrained_alignment(G_tilde, pose: Pose, cfg: ControllerConfig) -> np.ndarray:
    """Minimizer ``u = (r_des - r, phi)`` of the policy without box constraints."""
    G_u, c = alignment_objective(G_tilde, pose, cfg)
    sel = np.array(cfg.selector, dtype=np.float64)
    SG = sel[:, None] * G_u
    H = SG.T @ SG + np.diag([cfg.lam] * 3 + [cfg.mu] * 3)
    g = SG.T @ (sel * c)
    try:
        factor = scipy.linalg.cho_factor(H)
    except np.linalg.LinAlgError:
        raise InvariantViolation("alignment Hessian is not positive definite") from None
    return -scipy.linalg.cho_solve(factor, g)


def clip_increment(u, cfg: ControllerConfig) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    return np.concatenate([np.clip(u[:3], -cfg.box_pos, cfg.box_pos), np.clip(u[3:], -cfg.box_rot, cfg.box_rot)])


def boxed_setpoint(r: np.ndarray, offset: np.ndarray, box: float) -> np.ndarray:
    """``r + clip(offset)``, nudged inward so that ``|r_des - r| <= box`` holds in floating point."""
    r_des = r + np.clip(offset, -box, box)
    over = np.abs(r_des - r) > box
    while np.any(over):
        r_des[over] = np.nextafter(r_des[over], r[over])
        over = np.abs(r_des - r) > box
    return r_des


def solve_alignment(G_tilde, pose: Pose, cfg: ControllerConfig) -> ControlCommand:
    """Closed-form policy followed by componentwise clipping to the boxes."""
    u = clip_increment(unconstrained_alignment(G_tilde, pose, cfg), cfg)
    return ControlCommand(boxed_setpoint(pose.r, u[:3], cfg.box_pos), u[3:])


def _with_feed(cmd: ControlCommand, pose: Pose, scene: SocketScene, cfg: ControllerConfig) -> ControlCommand:
    r_des = cmd.r_des - cfg.insertion_feed * scene.socket_pose.R[:, 2]
    return ControlCommand(boxed_setpoint(pose.r, r_des - pose.r, cfg.box_pos), cmd.phi)


def alignment_episode(
    scene: SocketScene,
    sensor: SensorModel,
    G_tilde,
    cfg: ControllerConfig,
    steps: int,
    state: PlantState,
    *,
    controller: bool = True,
    first_step: int = 0,
) -> tuple[EpisodeTrace, PlantState]:
    """Closed-loop run: solve the policy, add the insertion feed, settle, record.

    With ``controller=False`` the policy is replaced by a command that holds
    the current pose (the scripted-insertion baseline); the feed still
    applies. Measurements use sensor sample indices ``first_step ...``.
    """
    G = _check_model(G_tilde)
    trace = EpisodeTrace()
    phase = PHASE_CONTROLLER if controller else PHASE_SCRIPTED
    for k in range(first_step, first_step + steps):
        pose = state.pose
        cmd = solve_alignment(G, pose, cfg) if controller else ControlCommand.hold(pose)
        cmd = _with_feed(cmd, pose, scene, cfg)
        measured = measure(sensor, true_wrench(state, cmd, scene), k)
        predicted = Wrench.from_vector(G @ feature_map(pose, cmd))
        trace.append(k, phase, pose, cmd, measured, predicted)
        state = plant_step(state, cmd, scene)
    trace.violations = state.violations
    return trace, state
