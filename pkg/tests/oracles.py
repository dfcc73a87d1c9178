"""Independent reference computations used only by the tests.

Nothing here calls into the code paths it is used to check: the Kalman
oracle forms the Joseph factors as explicit matrices, the least-squares
oracles stack residuals and call ``lstsq``, and the constrained-QP oracle
runs projected gradient descent.
"""

import numpy as np
import scipy.linalg


def random_rotation(rng):
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_spd(rng, n, scale=1.0):
    A = rng.standard_normal((n, n))
    return scale * (A @ A.T / n + 0.5 * np.eye(n))


def expm_rotvec(phi):
    x, y, z = phi
    return scipy.linalg.expm(np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]]))


def row_kalman_filter(g0, P0, Q, W, y):
    """Scalar-measurement Kalman filter for one row, explicit Joseph matrices."""
    g, P = g0.copy(), P0.copy()
    n = len(g)
    history = []
    for w, yk in zip(W, y):
        P = P + Q
        h = w.reshape(1, n)
        S = (h @ P @ h.T).item() + 1.0
        K = (P @ h.T) / S
        g = g + K[:, 0] * (yk - h @ g).item()
        A = np.eye(n) - K @ h
        P = A @ P @ A.T + K @ K.T
        P = 0.5 * (P + P.T)
        history.append(P.copy())
    return g, P, history


def stacked_ridge(W, Y, penalty_rows):
    """Rows of ``G`` minimizing ``|W g - y|^2 + |penalty_rows g|^2`` by stacked lstsq."""
    A = np.vstack([W, penalty_rows])
    G = []
    for j in range(Y.shape[1]):
        rhs = np.concatenate([Y[:, j], np.zeros(penalty_rows.shape[0])])
        G.append(np.linalg.lstsq(A, rhs, rcond=None)[0])
    return np.array(G)


def stacked_map(mu_ic, P0, A, Cs, Q, R, zs):
    """MAP trajectory by stacking whitened residuals into one dense lstsq."""
    n = len(mu_ic)
    m = len(zs)
    Wp = np.linalg.cholesky(np.linalg.inv(P0)).T
    Wq = np.linalg.cholesky(np.linalg.inv(Q)).T
    Wr = np.linalg.cholesky(np.linalg.inv(np.atleast_2d(R))).T
    rows, rhs = [], []
    block = np.zeros((n, n * (m + 1)))
    block[:, :n] = Wp
    rows.append(block)
    rhs.append(Wp @ mu_ic)
    for k in range(m):
        dyn = np.zeros((n, n * (m + 1)))
        dyn[:, n * (k + 1):n * (k + 2)] = Wq
        dyn[:, n * k:n * (k + 1)] = -Wq @ A
        rows.append(dyn)
        rhs.append(np.zeros(n))
        C = np.atleast_2d(Cs[k])
        meas = np.zeros((C.shape[0], n * (m + 1)))
        meas[:, n * (k + 1):n * (k + 2)] = Wr @ C
        rows.append(meas)
        rhs.append(Wr @ np.atleast_1d(zs[k]))
    x = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)[0]
    return x.reshape(m + 1, n)


def projected_gradient_box_qp(H, g, lo, hi, iters=20000, tol=1e-14):
    """Minimize ``0.5 u^T H u + g^T u`` over the box ``lo <= u <= hi``."""
    step = 1.0 / np.linalg.eigvalsh(H).max()
    u = np.clip(np.zeros_like(g), lo, hi)
    for _ in range(iters):
        u_next = np.clip(u - step * (H @ u + g), lo, hi)
        if np.max(np.abs(u_next - u)) < tol:
            return u_next
        u = u_next
    return u
