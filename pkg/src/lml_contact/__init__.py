"""Online learning of a linear quasi-static contact-force model and its use for alignment."""

from .batch_oracle import Dataset, solve_map_trajectory, solve_ridge, solve_weighted
from .lml_filter import (
    KalmanStepDiagnostics,
    LinearModelLearner,
    ModelBelief,
    adaptive_regularize,
    init_belief,
    lml_step,
    predict_wrench,
    unwhiten_model,
    whiten,
)
from .model_types import ControlCommand, NoiseSpec, Pose, Wrench, axis_angle_between, feature_map

__all__ = [
    "ControlCommand",
    "Dataset",
    "KalmanStepDiagnostics",
    "LinearModelLearner",
    "ModelBelief",
    "NoiseSpec",
    "Pose",
    "Wrench",
    "adaptive_regularize",
    "axis_angle_between",
    "feature_map",
    "init_belief",
    "lml_step",
    "predict_wrench",
    "solve_map_trajectory",
    "solve_ridge",
    "solve_weighted",
    "unwhiten_model",
    "whiten",
]
