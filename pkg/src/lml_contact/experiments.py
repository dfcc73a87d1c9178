"""Pipelines chaining the simulator, the filter and the controller.

Every pipeline takes its sensor sample index range explicitly (``first_step``)
so a full experiment draws each noise sample exactly once and is reproducible
from the sensor seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alignment_controller import ControllerConfig, alignment_episode
from .errors import InvalidInputError
from .lml_filter import LinearModelLearner
from .model_types import ControlCommand, NoiseSpec, Pose, feature_map
from .quasistatic_sim import (
    PlantState,
    SensorModel,
    SocketScene,
    calibration_trajectory,
    measure,
    misaligned_start,
    plant_step,
    track_target,
    true_wrench,
)
from .trace import PHASE_CALIBRATION, PHASE_SCRIPTED, EpisodeTrace


@dataclass(frozen=True)
class CalibrationSettings:
    duration_s: float = 10.0
    rate_hz: float = 100.0
    amplitude_pos: float = 0.01
    amplitude_rot: float = float(np.deg2rad(3.0))
    seed: int = 0


@dataclass(frozen=True)
class InsertionSettings:
    misalignment_pos: tuple = (0.003, 0.0)
    misalignment_rot: tuple = (0.0, 0.0, 0.0)
    start_height: float = 0.005
    hold_depth: float = 0.02
    hold_steps: int = 100
    align_steps: int = 200


def scripted_insertion(
    scene: SocketScene,
    sensor: SensorModel,
    start: Pose,
    cfg: ControllerConfig,
    hold_depth: float,
    hold_steps: int,
    first_step: int = 0,
    max_steps: int = 10_000,
) -> tuple[EpisodeTrace, PlantState, np.ndarray]:
    """Feed straight down until ``hold_depth`` below the socket mouth, then hold.

    The robot believes it is aligned, so lateral position and attitude are
    never corrected. Returns the trace, the final state and a boolean mask
    marking the hold-phase rows.
    """
    if cfg.insertion_feed <= 0:
        raise InvalidInputError("scripted insertion needs a positive insertion feed")
    state = PlantState(start)
    trace = EpisodeTrace()
    holding = []
    down = scene.socket_pose.R[:, 2]
    k = first_step
    held = 0
    while held < hold_steps:
        if k - first_step >= max_steps:
            raise InvalidInputError("scripted insertion did not reach the hold depth")
        pose = state.pose
        depth = -scene.to_socket(pose.r)[2]
        hold = depth >= hold_depth
        step = 0.0 if hold else min(cfg.insertion_feed, (hold_depth - depth) / scene.settle_fraction)
        cmd = ControlCommand(pose.r - step * down, np.zeros(3))
        measured = measure(sensor, true_wrench(state, cmd, scene), k)
        trace.append(k, PHASE_SCRIPTED, pose, cmd, measured)
        holding.append(hold)
        held += hold
        state = plant_step(state, cmd, scene)
        k += 1
    trace.violations = state.violations
    return trace, state, np.array(holding)


def run_calibration(
    scene: SocketScene,
    sensor: SensorModel,
    noise: NoiseSpec,
    state: PlantState,
    settings: CalibrationSettings,
    first_step: int = 0,
    regularize_interval: int | None = None,
    steps: int | None = None,
) -> tuple[LinearModelLearner, EpisodeTrace, PlantState]:
    """Excite the plant around its current pose and learn the wrench model online.

    ``steps`` overrides ``duration_s * rate_hz``. Each trace row carries the
    prediction made before that row's measurement was absorbed and the
    innovation variance of the update.
    """
    duration = settings.duration_s if steps is None else steps / settings.rate_hz
    center = state.pose
    targets = calibration_trajectory(
        duration, settings.rate_hz, settings.amplitude_pos, settings.amplitude_rot, settings.seed, center
    )
    learner = LinearModelLearner(noise, regularize_interval)
    trace = EpisodeTrace()
    for k, target in enumerate(targets, start=first_step):
        cmd = track_target(state.pose, target, center)
        w = feature_map(state.pose, cmd)
        measured = measure(sensor, true_wrench(state, cmd, scene), k)
        predicted = learner.predict(w)
        diag = learner.update(w, measured)
        trace.append(k, PHASE_CALIBRATION, state.pose, cmd, measured, predicted, diag.innovation_variance)
        state = plant_step(state, cmd, scene)
    trace.violations = state.violations
    return learner, trace, state


@dataclass
class AlignmentResult:
    trace: EpisodeTrace
    hold_mean_fxy: float
    steady_mean_fxy: float
    reduction_ratio: float | None
    violations: int
    model: np.ndarray


def steady_window(n: int, fraction: float = 0.2) -> slice:
    return slice(n - max(1, int(round(fraction * n))), n)


def reduction_ratio(hold: float, steady: float, floor: float) -> float | None:
    """``1 - steady / hold``; undefined (None) when the hold force is within the noise floor."""
    if not hold > floor:
        return None
    return 1.0 - steady / hold


def alignment_experiment(
    scene: SocketScene,
    sensor: SensorModel,
    noise: NoiseSpec,
    cfg: ControllerConfig,
    insertion: InsertionSettings,
    calibration: CalibrationSettings | None = None,
    model: np.ndarray | None = None,
    controller: bool = True,
    regularize_interval: int | None = None,
) -> AlignmentResult:
    """Scripted misaligned insertion, optional calibration, then the closed loop.

    Pass either ``calibration`` (learn the model at the hold pose, as in
    deployment) or a ready ``model``.
    """
    start = misaligned_start(scene, insertion.misalignment_pos, insertion.misalignment_rot, insertion.start_height)
    trace, state, holding = scripted_insertion(scene, sensor, start, cfg, insertion.hold_depth, insertion.hold_steps)
    hold_mean = float(trace.force_xy[holding].mean())
    k = len(trace)

    if model is None:
        if calibration is None:
            raise InvalidInputError("alignment_experiment needs a model or calibration settings")
        learner, cal_trace, state = run_calibration(
            scene, sensor, noise, state, calibration, first_step=k, regularize_interval=regularize_interval
        )
        trace.extend(cal_trace)
        model = learner.model
        k += len(cal_trace)

    episode, state = alignment_episode(
        scene, sensor, model, cfg, insertion.align_steps, state, controller=controller, first_step=k
    )
    trace.extend(episode)
    steady_mean = float(episode.force_xy[steady_window(len(episode))].mean())
    floor = 3.0 * float(np.sqrt(np.max(np.diag(sensor.R_sensor)[:2])))
    return AlignmentResult(
        trace, hold_mean, steady_mean, reduction_ratio(hold_mean, steady_mean, floor), state.violations, model
    )


def misalignment_scenarios(n: int = 8, seed: int = 0):
    """Seeded misalignments: per-axis lateral offsets of 1-5 mm and tilts of 1-5 degrees, random signs."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        lateral = rng.uniform(1e-3, 5e-3, 2) * rng.choice([-1.0, 1.0], 2)
        tilt = np.deg2rad(rng.uniform(1.0, 5.0, 2)) * rng.choice([-1.0, 1.0], 2)
        out.append((tuple(lateral), (tilt[0], tilt[1], 0.0)))
    return out
