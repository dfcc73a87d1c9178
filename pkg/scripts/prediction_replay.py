"""Measured against predicted wrenches on held-out motion.

Calibrates at the hold pose, then drives a second excitation with another
seed and records each measurement next to the prediction of the frozen
model. Writes a paired CSV and prints per-channel RMSE relative to the
sensor noise level.
"""

import argparse
from pathlib import Path

import numpy as np

from lml_contact.alignment_controller import ControllerConfig
from lml_contact.experiments import CalibrationSettings, run_calibration, scripted_insertion
from lml_contact.model_types import NoiseSpec, feature_map
from lml_contact.quasistatic_sim import (
    SensorModel,
    SocketScene,
    calibration_trajectory,
    default_sensor_covariance,
    measure,
    misaligned_start,
    plant_step,
    track_target,
    true_wrench,
)

CHANNELS = ("f_x", "f_y", "f_z", "tau_x", "tau_y", "tau_z")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--contact-model", default="linear", choices=("linear", "piecewise_clearance"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("out/prediction_replay.csv"))
    args = parser.parse_args()

    scene = SocketScene(contact_model=args.contact_model)
    R = default_sensor_covariance()
    sensor = SensorModel(R, seed=args.seed)
    noise = NoiseSpec.create(R, b=1e-6)
    start = misaligned_start(scene, (0.003, 0.0), (0.0, 0.0, 0.0))
    trace, state, _ = scripted_insertion(scene, sensor, start, ControllerConfig(), 0.02, 100)
    learner, cal, state = run_calibration(scene, sensor, noise, state, CalibrationSettings(seed=args.seed), len(trace))

    center = state.pose
    k0 = len(trace) + len(cal)
    rows = []
    for k, target in enumerate(calibration_trajectory(10.0, 100.0, seed=args.seed + 1000, center=center), start=k0):
        cmd = track_target(state.pose, target, center)
        measured = measure(sensor, true_wrench(state, cmd, scene), k).as_vector()
        predicted = learner.model @ feature_map(state.pose, cmd)
        rows.append(np.concatenate([[k], np.column_stack([measured, predicted]).ravel()]))
        state = plant_step(state, cmd, scene)

    data = np.array(rows)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    header = ",".join(["step"] + [f"{c}{s}" for c in CHANNELS for s in ("", "_pred")])
    np.savetxt(args.out, data, delimiter=",", header=header, comments="", fmt="%.17g")

    rmse = np.sqrt(np.mean((data[:, 1::2] - data[:, 2::2]) ** 2, axis=0))
    sigma = np.sqrt(np.diag(R))
    print(f"held-out prediction on the {args.contact_model} scene ({len(data)} samples)")
    for name, e, s in zip(CHANNELS, rmse, sigma):
        print(f"  {name:6s} RMSE {e:.4g}  ({e / s:.2f} x noise std)")


if __name__ == "__main__":
    main()
