"""Domain types shared by every module, plus the feature map.

Conventions used throughout the package:

* Vectors are 1-D float64 numpy arrays, matrices are 2-D float64 arrays.
* ``vec(R)`` flattens a rotation matrix column by column (Fortran order).
* A wrench is ordered ``[fx, fy, fz, tx, ty, tz]``.
* The feature vector is ``[r, vec(R), r_des, phi, 1]`` (length 19), so the
  control entries (``r_des`` and ``phi``) occupy indices 12..17.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

N_Y = 6
N_W = 19

POSITION = slice(0, 3)
ROTATION = slice(3, 12)
R_DES = slice(12, 15)
PHI = slice(15, 18)
CONTROL = slice(12, 18)
BIAS = 18

ORTHONORMAL_TOL = 1e-9
# below this distance from pi the rotation axis sign is fixed by convention
PI_BRANCH_TOL = 1e-7


def _frozen(value, shape: tuple[int, ...], name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.shape != shape:
        raise InvalidInputError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix, ``skew(a) @ b == cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(M: np.ndarray) -> np.ndarray:
    """Inverse of :func:`skew` applied to the antisymmetric part of ``M``."""
    return 0.5 * np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])


def rotation_from_rotvec(phi: np.ndarray) -> np.ndarray:
    """Matrix exponential of ``skew(phi)`` (Rodrigues' formula)."""
    phi = np.asarray(phi, dtype=np.float64)
    theta = float(np.linalg.norm(phi))
    K = skew(phi)
    if theta < 1e-6:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Closest rotation matrix in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] *= -1.0
        Q = U @ Vt
    return Q


def _check_rotation(R: np.ndarray, name: str = "R") -> None:
    err = np.max(np.abs(R.T @ R - np.eye(3)))
    if err > ORTHONORMAL_TOL or abs(np.linalg.det(R) - 1.0) > ORTHONORMAL_TOL:
        raise InvalidInputError(f"{name} is not a rotation matrix (orthonormality error {err:.3g})")


def log_rotation(M: np.ndarray) -> np.ndarray:
    """Axis-angle vector ``phi`` with ``rotation_from_rotvec(phi) == M`` and ``|phi| <= pi``.

    Near an angle of pi the axis is read from the symmetric part of ``M``.
    Within ``PI_BRANCH_TOL`` of pi the two candidate axes describe the same
    rotation up to that tolerance, and the one whose first nonzero entry is
    positive is returned.
    """
    v = vee(M)
    sin_theta = float(np.linalg.norm(v))
    cos_theta = 0.5 * (np.trace(M) - 1.0)
    theta = float(np.arctan2(sin_theta, cos_theta))
    if theta < 1e-6:
        # theta / sin(theta) series
        return v * (1.0 + sin_theta * sin_theta / 6.0)
    if theta < 0.5 * np.pi:
        return v * (theta / sin_theta)

    sym = 0.5 * (M + M.T)
    outer = (sym - cos_theta * np.eye(3)) / (1.0 - cos_theta)
    k = int(np.argmax(np.diag(outer)))
    axis = outer[:, k] / np.sqrt(outer[k, k])
    axis /= np.linalg.norm(axis)
    if np.pi - theta <= PI_BRANCH_TOL:
        nonzero = np.flatnonzero(np.abs(axis) > 1e-12)
        if axis[nonzero[0]] < 0:
            axis = -axis
    elif axis @ v < 0:
        axis = -axis
    return theta * axis


@dataclass(frozen=True)
class Pose:
    """End-effector position (m) and attitude."""

    r: np.ndarray
    R: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "r", _frozen(self.r, (3,), "r"))
        object.__setattr__(self, "R", _frozen(self.R, (3, 3), "R"))
        _check_rotation(self.R)


@dataclass(frozen=True)
class ControlCommand:
    """Impedance set point ``r_des`` (m) and attitude correction ``phi`` (rad)."""

    r_des: np.ndarray
    phi: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "r_des", _frozen(self.r_des, (3,), "r_des"))
        object.__setattr__(self, "phi", _frozen(self.phi, (3,), "phi"))

    @classmethod
    def hold(cls, pose: Pose) -> "ControlCommand":
        """Command that keeps the current pose."""
        return cls(pose.r.copy(), np.zeros(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.r_des, self.phi])


@dataclass(frozen=True)
class Wrench:
    f: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", _frozen(self.f, (3,), "f"))
        object.__setattr__(self, "tau", _frozen(self.tau, (3,), "tau"))

    @classmethod
    def from_vector(cls, y) -> "Wrench":
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (N_Y,):
            raise InvalidInputError(f"wrench vector must have shape ({N_Y},), got {y.shape}")
        return cls(y[:3], y[3:])

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(np.zeros(3), np.zeros(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.f, self.tau])


def axis_angle_between(R_current: np.ndarray, R_desired: np.ndarray) -> np.ndarray:
    """Axis-angle ``phi`` such that ``R_current @ exp(skew(phi)) == R_desired``."""
    R_current = np.asarray(R_current, dtype=np.float64)
    R_desired = np.asarray(R_desired, dtype=np.float64)
    _check_rotation(R_current, "R_current")
    _check_rotation(R_desired, "R_desired")
    return log_rotation(R_current.T @ R_desired)


def feature_map(pose: Pose, cmd: ControlCommand) -> np.ndarray:
    """Feature vector ``[r, vec(R), r_des, phi, 1]`` of length 19."""
    w = np.empty(N_W)
    w[POSITION] = pose.r
    w[ROTATION] = pose.R.ravel(order="F")
    w[R_DES] = cmd.r_des
    w[PHI] = cmd.phi
    w[BIAS] = 1.0
    return w


@dataclass(frozen=True)
class NoiseSpec:
    """Sensor covariance, its whitening factors, process noise and regularizers.

    ``L`` is the lower Cholesky factor of ``inv(R_sensor)`` and ``L_invT`` is
    ``inv(L).T``; both are computed once by :meth:`create`. Entries of ``b``
    equal to zero fall back to a prior variance of ``prior_variance_cap``;
    a cap of ``None`` makes them an error instead.
    """

    R_sensor: np.ndarray
    L: np.ndarray
    L_invT: np.ndarray
    Q: np.ndarray
    b: np.ndarray
    rho: np.ndarray
    prior_variance_cap: float | None = 1e6

    def __post_init__(self):
        n_y = self.R_sensor.shape[0]
        n_w = self.b.shape[0]
        if self.R_sensor.shape != (n_y, n_y) or self.L.shape != (n_y, n_y) or self.L_invT.shape != (n_y, n_y):
            raise InvalidConfigError("sensor covariance factors must be square and of equal size")
        if self.Q.shape != (n_w, n_w) or self.rho.shape != (n_w,):
            raise InvalidConfigError(f"Q must be {n_w}x{n_w} and rho of length {n_w}")
        if np.any(self.b < 0) or np.any(self.rho < 0):
            raise InvalidConfigError("regularization weights must be nonnegative")
        if self.prior_variance_cap is not None and not self.prior_variance_cap > 0:
            raise InvalidConfigError("prior_variance_cap must be positive")
        diag = np.diag(self.Q)
        if np.count_nonzero(self.Q - np.diag(diag)) == 0:
            lowest = diag.min()
        else:
            lowest = np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T)).min()
        if lowest < -1e-12:
            raise InvalidConfigError("process covariance Q must be positive semidefinite")

    @classmethod
    def create(
        cls,
        R_sensor,
        n_w: int = N_W,
        b=1e-3,
        rho=0.0,
        q: float = 0.0,
        Q=None,
        prior_variance_cap: float | None = 1e6,
    ) -> "NoiseSpec":
        R_sensor = np.array(R_sensor, dtype=np.float64)
        if R_sensor.ndim != 2 or R_sensor.shape[0] != R_sensor.shape[1]:
            raise InvalidConfigError("R_sensor must be a square matrix")
        if not np.all(np.isfinite(R_sensor)) or not np.allclose(R_sensor, R_sensor.T, rtol=0, atol=1e-12 * np.abs(R_sensor).max()):
            raise InvalidConfigError("R_sensor must be finite and symmetric")
        try:
            np.linalg.cholesky(R_sensor)
        except np.linalg.LinAlgError:
            raise InvalidConfigError("R_sensor must be positive definite") from None
        R_inv = np.linalg.inv(R_sensor)
        L = np.linalg.cholesky(0.5 * (R_inv + R_inv.T))
        L_invT = np.linalg.inv(L).T
        b = np.broadcast_to(np.asarray(b, dtype=np.float64), (n_w,)).copy()
        rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), (n_w,)).copy()
        if Q is None:
            Q = q * np.eye(n_w)
        Q = np.array(Q, dtype=np.float64)
        return cls(R_sensor, L, L_invT, Q, b, rho, prior_variance_cap)

    @property
    def n_y(self) -> int:
        return self.R_sensor.shape[0]

    @property
    def n_w(self) -> int:
        return self.b.shape[0]

    def prior_variance(self) -> np.ndarray:
        """Diagonal of the initial covariance, ``1 / b**2`` with zero entries capped."""
        var = np.empty_like(self.b)
        zero = self.b == 0
        if np.any(zero):
            if self.prior_variance_cap is None:
                raise InvalidConfigError("b has zero entries and no prior variance cap is configured")
            var[zero] = self.prior_variance_cap
        var[~zero] = 1.0 / self.b[~zero] ** 2
        return var

    def prior_precision(self) -> np.ndarray:
        """Effective ``b**2`` matching :meth:`prior_variance`."""
        return 1.0 / self.prior_variance()
