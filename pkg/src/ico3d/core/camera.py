"""Pinhole camera model: intrinsics plus a rigid world-to-camera pose."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError


def _check_rigid(mat: np.ndarray, what: str) -> None:
    if mat.shape != (4, 4):
        raise InvalidInputError(f"{what} must be a 4x4 matrix")
    if not np.all(np.isfinite(mat)):
        raise InvalidInputError(f"{what} contains NaN/Inf")
    if not np.allclose(mat[3], (0.0, 0.0, 0.0, 1.0), atol=1e-9):
        raise InvalidInputError(f"{what} bottom row must be (0,0,0,1)")
    rot = mat[:3, :3]
    if np.abs(rot @ rot.T - np.eye(3)).max() > 1e-6:
        raise InvalidInputError(f"{what} rotation block is not orthonormal within 1e-6")
    if np.linalg.det(rot) < 0:
        raise InvalidInputError(f"{what} rotation block has determinant -1")


@dataclass
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    world_to_camera: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self) -> None:
        self.world_to_camera = np.ascontiguousarray(self.world_to_camera, dtype=np.float64)
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError("viewport must be positive")
        _check_rigid(self.world_to_camera, "world_to_camera")

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_camera[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_camera[:3, 3]

    @property
    def center(self) -> np.ndarray:
        """Camera origin in world space."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """World points (N,3) -> camera-space points (N,3)."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def project_points(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """World points -> (pixel coordinates (N,2), camera-space depth (N,))."""
        cam = self.to_camera(points)
        z = cam[:, 2]
        uv = np.stack([
            self.fx * cam[:, 0] / z + self.cx,
            self.fy * cam[:, 1] / z + self.cy,
        ], axis=1)
        return uv, z

    def with_pose(self, world_to_camera: np.ndarray) -> "CameraModel":
        return CameraModel(self.fx, self.fy, self.cx, self.cy,
                           self.width, self.height, world_to_camera)


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """World-to-camera matrix for a camera at `eye` looking at `target`.

    Camera convention: +z forward (into the scene), +x right, +y down is NOT
    assumed; +y follows the provided up vector projected off the view axis.
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise InvalidInputError("look_at eye and target coincide")
    fwd = fwd / n
    upv = np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, upv)
    rn = np.linalg.norm(right)
    if rn < 1e-12:
        raise InvalidInputError("up vector is parallel to the view direction")
    right /= rn
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd])
    mat = np.eye(4)
    mat[:3, :3] = rot
    mat[:3, 3] = -rot @ eye
    return mat


def default_camera(width: int = 128, height: int = 128, fov_deg: float = 60.0,
                   eye=(0.0, 0.0, -3.0), target=(0.0, 0.0, 0.0)) -> CameraModel:
    f = 0.5 * width / np.tan(np.deg2rad(fov_deg) / 2)
    return CameraModel(fx=f, fy=f, cx=(width - 1) / 2, cy=(height - 1) / 2,
                       width=width, height=height,
                       world_to_camera=look_at(eye, target))
