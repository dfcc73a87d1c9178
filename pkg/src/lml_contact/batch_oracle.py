"""Closed-form reference solvers for the learning problems.

These are the ground truth the recursive filter is checked against, so they
favour directness over speed: normal equations assembled explicitly and
solved with dense (or sparse, for trajectories) factorizations.

Two readings of the quadratic regularizer ``|G b|^2`` are available through
``penalty``:

* ``"diagonal"`` (default): ``sum_i b_i**2 * G[:, i]**2``, the penalty encoded by
  the prior covariance ``diag(1 / b**2)``;
* ``"rank_one"``: ``sum_j (b . g_j)**2`` with ``g_j`` the rows of ``G``, i.e. the
  literal ``|G b|^2`` adding ``b b^T`` to each row's normal matrix.

The two coincide only when ``n_w == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import InvalidInputError, RankDeficientError
from .model_types import NoiseSpec, Wrench

PENALTIES = ("diagonal", "rank_one")
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Feature vectors (m x n_w) paired with raw wrench measurements (m x n_y)."""

    features: np.ndarray
    measurements_raw: np.ndarray

    def __post_init__(self):
        W = np.atleast_2d(np.array(self.features, dtype=np.float64))
        Y = [y.as_vector() if isinstance(y, Wrench) else y for y in self.measurements_raw]
        Y = np.atleast_2d(np.array(Y, dtype=np.float64))
        if W.shape[0] != Y.shape[0]:
            raise InvalidInputError(f"{W.shape[0]} feature vectors but {Y.shape[0]} measurements")
        if W.shape[0] < 1:
            raise InvalidInputError("dataset must hold at least one sample")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(Y))):
            raise InvalidInputError("dataset contains non-finite entries")
        object.__setattr__(self, "features", W)
        object.__setattr__(self, "measurements_raw", Y)

    @property
    def m(self) -> int:
        return self.features.shape[0]


def whiten_dataset(data: Dataset, noise: NoiseSpec) -> np.ndarray:
    """Whitened measurements as an m x n_y array (rows ``L^T y_raw``)."""
    return data.measurements_raw @ noise.L


def _penalty_matrix(weights, penalty: str, n_w: int) -> np.ndarray:
    if penalty not in PENALTIES:
        raise InvalidInputError(f"penalty must be one of {PENALTIES}, got {penalty!r}")
    if weights is None:
        return np.zeros((n_w, n_w))
    weights = np.broadcast_to(np.asarray(weights, dtype=np.float64), (n_w,))
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise InvalidInputError("regularization weights must be finite and nonnegative")
    if penalty == "diagonal":
        return np.diag(weights**2)
    return np.outer(weights, weights)


def _regularizer(noise: NoiseSpec, extra_reg, penalty: str) -> np.ndarray:
    n_w = noise.n_w
    if penalty == "diagonal":
        P = np.diag(noise.prior_precision())
    else:
        P = _penalty_matrix(noise.b, penalty, n_w)
    return P + _penalty_matrix(extra_reg, penalty, n_w)


def _check_rank(M: np.ndarray):
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv[0] > 0 else 0
    if rank < M.shape[0]:
        raise RankDeficientError(M.shape[0] - rank, M.shape[0])


def solve_weighted(
    data: Dataset,
    noise: NoiseSpec,
    regularize: bool = False,
    extra_reg=None,
    penalty: str = "diagonal",
) -> np.ndarray:
    """Minimizer of ``sum_k |G w_k - y_k|^2_{R^-1}`` over raw ``G``, as one joint problem.

    The unknown ``vec(G)`` (column-major, length ``n_y * n_w``) solves
    ``(Gram kron R^-1 + P kron R^-1) vec(G) = vec(R^-1 Y^T W)`` where ``P`` is
    the regularizer mapped to raw coordinates (``|L^T G b|^2`` and so on). No
    whitening is involved, so this is an independent route to the answer.
    """
    W, Y = data.features, data.measurements_raw
    n_w, n_y = W.shape[1], Y.shape[1]
    if n_w != noise.n_w or n_y != noise.n_y:
        raise InvalidInputError("dataset dimensions do not match the noise specification")
    R_inv = np.linalg.inv(noise.R_sensor)
    gram = W.T @ W
    if regularize:
        P = _regularizer(noise, extra_reg, penalty)
    else:
        P = _penalty_matrix(extra_reg, penalty, n_w)
    _check_rank(gram + P)
    H = np.kron(gram + P, R_inv)
    rhs = (R_inv @ Y.T @ W).ravel(order="F")
    x = scipy.linalg.solve(H, rhs, assume_a="pos")
    return x.reshape((n_y, n_w), order="F")


def solve_ridge(
    data: Dataset,
    noise: NoiseSpec,
    extra_reg=None,
    penalty: str = "diagonal",
) -> np.ndarray:
    """Whitened-coordinate minimizer of ``sum_k |G w_k - y_k|^2 + |G b|^2 (+ |G rho|^2)``.

    Solved row by row: each row ``g_j`` satisfies
    ``(sum_k w_k w_k^T + P) g_j = sum_k y_k[j] w_k``.
    """
    W = data.features
    Y = whiten_dataset(data, noise)
    if W.shape[1] != noise.n_w:
        raise InvalidInputError("dataset dimensions do not match the noise specification")
    M = W.T @ W + _regularizer(noise, extra_reg, penalty)
    _check_rank(M)
    factor = scipy.linalg.cho_factor(M)
    G = np.empty((Y.shape[1], W.shape[1]))
    for j in range(Y.shape[1]):
        G[j] = scipy.linalg.cho_solve(factor, W.T @ Y[:, j])
    return G


def _spd_inverse(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} must be a finite square matrix")
    try:
        factor = scipy.linalg.cho_factor(M)
    except np.linalg.LinAlgError:
        raise InvalidInputError(f"{name} must be symmetric positive definite") from None
    return scipy.linalg.cho_solve(factor, np.eye(M.shape[0]))


def solve_map_trajectory(prior_mean, prior_cov, A, C_sequence, Q, R, z_sequence) -> np.ndarray:
    """MAP state trajectory ``mu_0 .. mu_m`` of a linear-Gaussian system.

    Minimizes ``|mu_ic - mu_0|^2_{P0^-1} + sum_k |mu_{k+1} - A mu_k|^2_{Q^-1}
    + |z_{k+1} - C_{k+1} mu_{k+1}|^2_{R^-1}`` with one sparse solve of the
    block-tridiagonal normal equations. ``C_sequence[k]`` and ``z_sequence[k]``
    belong to state ``k + 1``. Returns an ``(m + 1, n_x)`` array.
    """
    mu_ic = np.atleast_1d(np.asarray(prior_mean, dtype=np.float64))
    n = mu_ic.shape[0]
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.shape != (n, n):
        raise InvalidInputError(f"A must be {n}x{n}")
    P0_inv = _spd_inverse(prior_cov, "prior_cov")
    if len(C_sequence) != len(z_sequence):
        raise InvalidInputError("C_sequence and z_sequence differ in length")
    m = len(z_sequence)
    if m == 0:
        return mu_ic[None, :].copy()
    Q_inv = _spd_inverse(Q, "Q")
    R_inv = _spd_inverse(R, "R")
    n_z = R_inv.shape[0]

    AtQ = A.T @ Q_inv
    diag = [P0_inv + AtQ @ A] + [None] * m
    rhs = np.zeros((m + 1, n))
    rhs[0] = P0_inv @ mu_ic
    for k in range(m):
        C = np.asarray(C_sequence[k], dtype=np.float64).reshape(n_z, n)
        z = np.asarray(z_sequence[k], dtype=np.float64).reshape(n_z)
        block = Q_inv + C.T @ R_inv @ C
        if k + 1 < m:
            block = block + AtQ @ A
        diag[k + 1] = block
        rhs[k + 1] = C.T @ R_inv @ z

    blocks = [[None] * (m + 1) for _ in range(m + 1)]
    for k in range(m + 1):
        blocks[k][k] = diag[k]
    for k in range(m):
        blocks[k][k + 1] = -AtQ
        blocks[k + 1][k] = -AtQ.T
    H = scipy.sparse.bmat(blocks, format="csc")
    x = scipy.sparse.linalg.spsolve(H, rhs.ravel())
    return np.asarray(x).reshape(m + 1, n)
