"""Quaternion helpers. Convention: (w, x, y, z), scalar first."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError, NumericalSingularityError


def normalize(q: np.ndarray) -> np.ndarray:
    """Return q / |q|. Works on (4,) or (N, 4) arrays."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise InvalidInputError("cannot normalize a near-zero quaternion")
    return q / norm


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion. (4,) -> (3,3), (N,4) -> (N,3,3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    out[..., 0, 0] = 1 - 2 * (y * y + z * z)
    out[..., 0, 1] = 2 * (x * y - w * z)
    out[..., 0, 2] = 2 * (x * z + w * y)
    out[..., 1, 0] = 2 * (x * y + w * z)
    out[..., 1, 1] = 1 - 2 * (x * x + z * z)
    out[..., 1, 2] = 2 * (y * z - w * x)
    out[..., 2, 0] = 2 * (x * z - w * y)
    out[..., 2, 1] = 2 * (y * z + w * x)
    out[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def rotmat_to_quat(rot: np.ndarray) -> np.ndarray:
    """Unit quaternion (w,x,y,z) of a rotation matrix, w >= 0."""
    rot = np.asarray(rot, dtype=np.float64)
    m00, m11, m22 = rot[0, 0], rot[1, 1], rot[2, 2]
    tr = m00 + m11 + m22
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s,
                      (rot[2, 1] - rot[1, 2]) / s,
                      (rot[0, 2] - rot[2, 0]) / s,
                      (rot[1, 0] - rot[0, 1]) / s])
    elif m00 >= m11 and m00 >= m22:
        s = np.sqrt(1.0 + m00 - m11 - m22) * 2
        q = np.array([(rot[2, 1] - rot[1, 2]) / s,
                      0.25 * s,
                      (rot[0, 1] + rot[1, 0]) / s,
                      (rot[0, 2] + rot[2, 0]) / s])
    elif m11 >= m22:
        s = np.sqrt(1.0 + m11 - m00 - m22) * 2
        q = np.array([(rot[0, 2] - rot[2, 0]) / s,
                      (rot[0, 1] + rot[1, 0]) / s,
                      0.25 * s,
                      (rot[1, 2] + rot[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m22 - m00 - m11) * 2
        q = np.array([(rot[1, 0] - rot[0, 1]) / s,
                      (rot[0, 2] + rot[2, 0]) / s,
                      (rot[1, 2] + rot[2, 1]) / s,
                      0.25 * s])
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b; broadcasting over leading dims."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def random_unit_quats(rng: np.random.Generator, n: int) -> np.ndarray:
    """(n, 4) uniformly distributed unit quaternions, w >= 0."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[q[:, 0] < 0] *= -1
    return q


def build_covariance(rotation: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Covariance of one splat from its unit quaternion and per-axis extents.

    Sigma = R S S^T R^T with S = diag(scale); eigenvalues are the squared
    scales. Rejects quaternions whose norm is off unity by more than 1e-4.
    """
    rotation = np.asarray(rotation, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    if rotation.shape != (4,) or scale.shape != (3,):
        raise InvalidInputError("build_covariance expects a (4,) quaternion and (3,) scale")
    if abs(np.linalg.norm(rotation) - 1.0) > 1e-4:
        raise InvalidInputError("quaternion norm deviates from 1 by more than 1e-4")
    if np.any(scale <= 0):
        raise InvalidInputError("scales must be strictly positive")
    rot = quat_to_rotmat(rotation)
    return (rot * scale ** 2) @ rot.T


def build_covariances(rotations: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Vectorized Sigma = R diag(s^2) R^T for (N,4) quats and (N,3) scales."""
    rot = quat_to_rotmat(np.asarray(rotations, dtype=np.float64))
    s2 = np.asarray(scales, dtype=np.float64) ** 2
    return np.einsum("nij,nj,nkj->nik", rot, s2, rot)


def eval_gaussian(cov: np.ndarray, x: np.ndarray) -> float:
    """Unnormalized Gaussian density exp(-x^T Sigma^-1 x / 2) at offset x.

    Peak value 1 at x = 0. Raises NumericalSingularityError when the
    covariance is singular or its condition number exceeds 1e12.
    """
    cov = np.asarray(cov, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if cov.shape != (3, 3) or x.shape != (3,):
        raise InvalidInputError("eval_gaussian expects a (3,3) covariance and (3,) offset")
    eigvals = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    if eigvals[0] <= 0 or eigvals[-1] / eigvals[0] > 1e12:
        raise NumericalSingularityError("covariance is singular or ill-conditioned")
    d = float(x @ np.linalg.solve(cov, x))
    return float(np.exp(-0.5 * d))
