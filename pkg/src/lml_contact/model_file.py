"""JSON model files written by ``calibrate`` and read by ``align``/``replay``."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .lml_filter import ModelBelief
from .model_types import N_W, N_Y, NoiseSpec

FORMAT = "lml-contact-model"
VERSION = 1


def model_document(G_tilde, belief: ModelBelief | None = None, noise: NoiseSpec | None = None) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "n_y": N_Y,
        "n_w": N_W,
        "feature_layout": "r(3), vec(R) column-major (9), r_des(3), phi(3), 1",
        "G_tilde": np.asarray(G_tilde).tolist(),
    }
    if belief is not None:
        doc["G_hat"] = belief.G_hat.tolist()
        doc["Sigma"] = belief.Sigma.tolist()
        doc["step_count"] = int(belief.step_count)
    if noise is not None:
        doc["R_sensor"] = noise.R_sensor.tolist()
    return doc


def save_model(path, G_tilde, belief=None, noise=None):
    Path(path).write_text(json.dumps(model_document(G_tilde, belief, noise), indent=1) + "\n")


def load_model(path) -> np.ndarray:
    """Read and validate a model file, returning the raw 6x19 ``G_tilde``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise InvalidInputError(f"cannot read model file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"model file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise InvalidInputError(f"{path} is not an {FORMAT} file")
    if doc.get("version") != VERSION:
        raise InvalidInputError(f"{path}: unsupported model version {doc.get('version')!r}")
    try:
        G = np.array(doc["G_tilde"], dtype=np.float64)
    except (KeyError, TypeError, ValueError):
        raise InvalidInputError(f"{path}: missing or malformed G_tilde") from None
    if G.shape != (N_Y, N_W) or not np.all(np.isfinite(G)):
        raise InvalidInputError(f"{path}: G_tilde must be a finite {N_Y}x{N_W} matrix")
    return G
