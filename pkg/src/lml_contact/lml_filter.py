"""Inversion-free recursive estimation of a linear wrench model.

The model ``y_raw ~= G_tilde @ w`` is learned in whitened coordinates,
``G = L.T @ G_tilde`` and ``y = L.T @ y_raw`` with ``L @ L.T = inv(R_sensor)``,
where every output channel carries unit-variance noise. Each row of ``G`` is
then the state of a scalar-measurement Kalman filter with random-walk
dynamics and measurement matrix ``w.T``. None of those filters refers to its
row index, so they all share one covariance and one gain; the whole matrix is
updated with an outer product.

The regularizer ``b`` enters as the prior ``Sigma_0 = diag(1 / b**2)`` and
extra diagonal regularization ``rho`` can be folded in later, at any time,
through zero-valued scalar pseudo-measurements of single coordinates.

Nothing in ``lml_step`` or ``adaptive_regularize`` factorizes or inverts a
matrix: the only divisions are by scalar innovation variances. Both use the
Joseph covariance update evaluated as two rank-one corrections,
``(I - l c^T) S (I - l c^T)^T = B - (B c) l^T`` with ``B = S - l (c^T S)``,
which keeps the cost quadratic in ``n_w``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvariantViolation
from .model_types import NoiseSpec, Wrench

# tolerance on s >= 1 before declaring the covariance indefinite
S_FLOOR_TOL = 1e-10


@dataclass(frozen=True)
class ModelBelief:
    """Estimate of the whitened model and the covariance shared by its rows."""

    G_hat: np.ndarray
    Sigma: np.ndarray
    step_count: int = 0

    @property
    def n_y(self) -> int:
        return self.G_hat.shape[0]

    @property
    def n_w(self) -> int:
        return self.G_hat.shape[1]


@dataclass(frozen=True)
class KalmanStepDiagnostics:
    innovation: np.ndarray
    gain: np.ndarray
    innovation_variance: float


def _readonly(*arrays):
    for a in arrays:
        a.setflags(write=False)


def _as_finite(x, shape, name):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != shape:
        raise InvalidInputError(f"{name} must have shape {shape}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return x


def whiten(noise: NoiseSpec, y_raw) -> np.ndarray:
    """Map a raw wrench into coordinates with identity noise covariance."""
    if isinstance(y_raw, Wrench):
        y_raw = y_raw.as_vector()
    y_raw = _as_finite(y_raw, (noise.n_y,), "y_raw")
    return noise.L.T @ y_raw


def unwhiten_model(noise: NoiseSpec, G: np.ndarray) -> np.ndarray:
    """Raw-coordinate model ``L^-T @ G``."""
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != noise.n_y:
        raise InvalidInputError(f"G must have {noise.n_y} rows, got shape {G.shape}")
    return noise.L_invT @ G


def init_belief(noise: NoiseSpec, n_y: int | None = None) -> ModelBelief:
    """Zero mean with covariance ``diag(1 / b**2)`` encoding the regularizer."""
    n_y = noise.n_y if n_y is None else n_y
    G = np.zeros((n_y, noise.n_w))
    Sigma = np.diag(noise.prior_variance())
    _readonly(G, Sigma)
    return ModelBelief(G, Sigma, 0)


def lml_step(
    belief: ModelBelief, noise: NoiseSpec, w, y
) -> tuple[ModelBelief, KalmanStepDiagnostics]:
    """One predict/update cycle for a feature vector ``w`` and whitened measurement ``y``."""
    n_y, n_w = belief.G_hat.shape
    w = _as_finite(w, (n_w,), "w")
    y = _as_finite(y, (n_y,), "y")

    # predict: random-walk parameters
    Sigma = belief.Sigma + noise.Q
    G = belief.G_hat

    z = y - G @ w
    v = Sigma @ w
    s = float(w @ v) + 1.0
    if not s >= 1.0 - S_FLOOR_TOL:
        raise InvariantViolation(f"innovation variance {s!r} < 1: covariance lost positive semidefiniteness")
    gain = v / s

    G_new = G + np.outer(z, gain)
    B = Sigma - np.outer(gain, v)
    Sigma_new = B - np.outer(B @ w, gain)
    Sigma_new += np.outer(gain, gain)
    Sigma_new += Sigma_new.T
    Sigma_new *= 0.5

    _readonly(G_new, Sigma_new)
    return (
        ModelBelief(G_new, Sigma_new, belief.step_count + 1),
        KalmanStepDiagnostics(z, gain, s),
    )


def adaptive_regularize(belief: ModelBelief, rho) -> ModelBelief:
    """Add the penalty ``sum_i rho_i**2 * G[:, i]**2`` via sequential scalar updates.

    Coordinate ``i`` is conditioned on a pseudo-measurement equal to zero with
    variance ``1 / rho_i**2``; zero weights are skipped.
    """
    n_w = belief.n_w
    rho = _as_finite(rho, (n_w,), "rho")
    if np.any(rho < 0):
        raise InvalidInputError("rho entries must be nonnegative")

    G = np.array(belief.G_hat)
    Sigma = np.array(belief.Sigma)
    for i in np.flatnonzero(rho):
        r = (1.0 / rho[i]) ** 2
        s = Sigma[i, i] + r
        gain = Sigma[:, i] / s
        B = Sigma - np.outer(gain, Sigma[i, :])
        Sigma = B - np.outer(B[:, i], gain)
        Sigma += r * np.outer(gain, gain)
        Sigma += Sigma.T
        Sigma *= 0.5
        G -= np.outer(G[:, i], gain)

    _readonly(G, Sigma)
    return ModelBelief(G, Sigma, belief.step_count)


def predict_wrench(belief: ModelBelief, noise: NoiseSpec, w) -> Wrench:
    w = _as_finite(w, (belief.n_w,), "w")
    return Wrench.from_vector(unwhiten_model(noise, belief.G_hat) @ w)


class LinearModelLearner:
    """Stateful convenience wrapper feeding raw measurements through the filter.

    ``regularize_interval`` (if set) calls :func:`adaptive_regularize` with
    ``noise.rho`` after every that many updates; it is never applied otherwise.
    """

    def __init__(self, noise: NoiseSpec, regularize_interval: int | None = None):
        if regularize_interval is not None and regularize_interval < 1:
            raise InvalidInputError("regularize_interval must be positive")
        self.noise = noise
        self.regularize_interval = regularize_interval
        self.belief = init_belief(noise)
        self.last = None

    def update(self, w, y_raw) -> KalmanStepDiagnostics:
        self.belief, self.last = lml_step(self.belief, self.noise, w, whiten(self.noise, y_raw))
        if self.regularize_interval and self.belief.step_count % self.regularize_interval == 0:
            self.regularize()
        return self.last

    def regularize(self, rho=None):
        rho = self.noise.rho if rho is None else rho
        self.belief = adaptive_regularize(self.belief, rho)

    @property
    def model(self) -> np.ndarray:
        """Raw-coordinate estimate ``G_tilde``."""
        return unwhiten_model(self.noise, self.belief.G_hat)

    def predict(self, w) -> Wrench:
        return predict_wrench(self.belief, self.noise, w)
