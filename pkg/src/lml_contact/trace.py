"""Per-step episode records and their CSV representation.

One row per control period. Column order is fixed (see ``COLUMNS``);
``docs/formats.md`` documents each field. Floats are written with 17
significant digits so a file round-trips bit-exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .model_types import ControlCommand, Pose, Wrench

_AXES = ("x", "y", "z")
COLUMNS = (
    ["step", "phase"]
    + [f"r_{a}" for a in _AXES]
    + [f"R_{i}{j}" for j in range(1, 4) for i in range(1, 4)]  # column-major
    + [f"rdes_{a}" for a in _AXES]
    + [f"phi_{a}" for a in _AXES]
    + [f"f_{a}" for a in _AXES]
    + [f"tau_{a}" for a in _AXES]
    + [f"fhat_{a}" for a in _AXES]
    + [f"tauhat_{a}" for a in _AXES]
    + ["s"]
)
COL = {name: i for i, name in enumerate(COLUMNS)}

PHASE_SCRIPTED = 0
PHASE_CALIBRATION = 1
PHASE_CONTROLLER = 2


@dataclass
class EpisodeTrace:
    rows: list = field(default_factory=list)
    violations: int = 0

    def append(self, step: int, phase: int, pose: Pose, cmd: ControlCommand,
               measured: Wrench, predicted: Wrench | None = None, s: float = np.nan):
        pred = np.full(6, np.nan) if predicted is None else predicted.as_vector()
        self.rows.append(np.concatenate([
            [step, phase], pose.r, pose.R.ravel(order="F"), cmd.r_des, cmd.phi,
            measured.as_vector(), pred, [s],
        ]))

    def extend(self, other: "EpisodeTrace"):
        self.rows.extend(other.rows)
        self.violations = max(self.violations, other.violations)

    def __len__(self):
        return len(self.rows)

    def to_array(self) -> np.ndarray:
        if not self.rows:
            return np.empty((0, len(COLUMNS)))
        return np.vstack(self.rows)

    def column(self, *names: str) -> np.ndarray:
        data = self.to_array()
        return data[:, [COL[n] for n in names]]

    @property
    def force_xy(self) -> np.ndarray:
        """Magnitude of the measured XY force per row."""
        return np.hypot(*self.column("f_x", "f_y").T)

    def phase_mask(self, phase: int) -> np.ndarray:
        return self.to_array()[:, COL["phase"]] == phase


def write_csv(path, data: np.ndarray):
    data = np.asarray(data)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in data:
            writer.writerow([str(int(row[0])), str(int(row[1]))] + [format(v, ".17g") for v in row[2:]])


def read_csv(path) -> np.ndarray:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty trace file") from None
        if header != COLUMNS:
            raise InvalidInputError(f"{path}: trace columns do not match the documented schema")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(COLUMNS):
                raise InvalidInputError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        return np.empty((0, len(COLUMNS)))
    return np.array(rows)


def row_pose(row: np.ndarray) -> Pose:
    return Pose(row[COL["r_x"]:COL["r_x"] + 3], row[COL["R_11"]:COL["R_11"] + 9].reshape(3, 3, order="F"))


def row_command(row: np.ndarray) -> ControlCommand:
    return ControlCommand(row[COL["rdes_x"]:COL["rdes_x"] + 3], row[COL["phi_x"]:COL["phi_x"] + 3])
