"""Rigid poses on SE(3): closed-form exp/log and pose interpolation.

The logarithm uses the Rodrigues route with series fallbacks near zero angle;
a rotation at (or numerically at) angle pi has an ambiguous log branch and is
rejected. Interpolation blends in the tangent space anchored at the first
pose, so only the pairwise rotation angles need to stay below pi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BranchAmbiguityError, InvalidInputError
from .camera import _check_rigid

_BRANCH_MARGIN = 1e-9


@dataclass(frozen=True)
class Pose:
    """A rigid 4x4 homogeneous transform."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self) -> None:
        mat = np.ascontiguousarray(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", mat)
        _check_rigid(mat, "pose")

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def inverse(self) -> "Pose":
        rot_t = self.rotation.T
        mat = np.eye(4)
        mat[:3, :3] = rot_t
        mat[:3, 3] = -rot_t @ self.translation
        return Pose(mat)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.matrix @ other.matrix)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(4))

    @staticmethod
    def from_rt(rotation: np.ndarray, translation: np.ndarray) -> "Pose":
        mat = np.eye(4)
        mat[:3, :3] = rotation
        mat[:3, 3] = translation
        return Pose(mat)


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def unskew(mat: np.ndarray) -> np.ndarray:
    return np.array([mat[2, 1], mat[0, 2], mat[1, 0]])


def _rot_coeffs(theta: float) -> tuple[float, float, float]:
    """(sin t / t, (1-cos t)/t^2, (t - sin t)/t^3) with series near zero."""
    if theta < 1e-4:
        t2 = theta * theta
        return (1.0 - t2 / 6.0 + t2 * t2 / 120.0,
                0.5 - t2 / 24.0 + t2 * t2 / 720.0,
                1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0)
    s, c = np.sin(theta), np.cos(theta)
    return s / theta, (1.0 - c) / (theta * theta), (theta - s) / theta ** 3


def se3_exp(twist: np.ndarray) -> Pose:
    """Exponential map. twist = (v, omega): translation part first."""
    twist = np.asarray(twist, dtype=np.float64)
    if twist.shape != (6,):
        raise InvalidInputError("twist must have shape (6,)")
    v, omega = twist[:3], twist[3:]
    theta = float(np.linalg.norm(omega))
    a, b, c = _rot_coeffs(theta)
    k = skew(omega)
    k2 = k @ k
    rot = np.eye(3) + a * k + b * k2
    vmat = np.eye(3) + b * k + c * k2
    return Pose.from_rt(rot, vmat @ v)


def se3_log(pose: Pose) -> np.ndarray:
    """Logarithm map, inverse of se3_exp. Twist layout (v, omega).

    Raises BranchAmbiguityError when the rotation angle reaches pi.
    """
    rot = pose.rotation
    cos_theta = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta >= np.pi - _BRANCH_MARGIN:
        raise BranchAmbiguityError(
            f"rotation angle {theta:.12f} is at the pi branch cut")
    if theta < 1e-6:
        # At tiny angles (R - R^T)/2 loses relative accuracy gracefully:
        # omega ~ unskew(R - R^T)/2 with a second-order angle correction.
        omega = unskew(rot - rot.T) / 2.0
        omega *= 1.0 + theta * theta / 6.0
    else:
        omega = unskew(rot - rot.T) * theta / (2.0 * np.sin(theta))
    k = skew(omega)
    k2 = k @ k
    if theta < 1e-4:
        d = 1.0 / 12.0 + theta * theta / 720.0
    else:
        a, b, _ = _rot_coeffs(theta)
        d = (1.0 - a / (2.0 * b)) / (theta * theta)
    vinv = np.eye(3) - 0.5 * k + d * k2
    v = vinv @ pose.translation
    return np.concatenate([v, omega])


def relative_angle(a: Pose, b: Pose) -> float:
    """Rotation angle of a^-1 b."""
    rel = a.rotation.T @ b.rotation
    return float(np.arccos(np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)))


def _project_rotation(rot: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rot)
    proj = u @ vt
    if np.linalg.det(proj) < 0:
        u[:, -1] *= -1
        proj = u @ vt
    return proj


def interpolate_pose(poses: list[Pose], beta: np.ndarray) -> Pose:
    """Blend rigid poses: P = P_1 exp(sum_c beta_c log(P_1^-1 P_c)).

    Anchoring the exp/log blend at the first pose keeps every logarithm
    inside its branch whenever the poses are pairwise less than pi apart
    (a pose's absolute rotation may be arbitrary). With P_1 = identity this
    reduces to exp(sum_c beta_c log(P_c)); for two poses the result is the
    geodesic point and does not depend on the anchor. beta entries must lie
    in [0,1] and sum to 1.
    """
    beta = np.asarray(beta, dtype=np.float64)
    if len(poses) == 0 or beta.shape != (len(poses),):
        raise InvalidInputError("need one weight per pose")
    if np.any(beta < -1e-12) or np.any(beta > 1 + 1e-12) or abs(beta.sum() - 1.0) > 1e-9:
        raise InvalidInputError("weights must lie in [0,1] and sum to 1")
    for i in range(len(poses)):
        for j in range(i + 1, len(poses)):
            if relative_angle(poses[i], poses[j]) >= np.pi - _BRANCH_MARGIN:
                raise BranchAmbiguityError(
                    f"poses {i} and {j} are separated by a rotation angle >= pi")
    anchor = poses[0]
    anchor_inv = anchor.inverse()
    twist = np.zeros(6)
    for pose, w in zip(poses, beta):
        twist += w * se3_log(anchor_inv.compose(pose))
    out = anchor.compose(se3_exp(twist))
    # Guard against accumulation drift: project the rotation block back onto
    # SO(3). The correction is asserted tiny so real errors are not masked.
    rot = out.rotation
    drift = float(np.abs(rot @ rot.T - np.eye(3)).max())
    if drift > 1e-9:
        mat = out.matrix.copy()
        mat[:3, :3] = _project_rotation(rot)
        out = Pose(mat)
    return out
