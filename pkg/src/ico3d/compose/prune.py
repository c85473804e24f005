"""Pruning body splats that would collide with the inserted head.

Two removal rules, applied to body means only:
  - inside a sphere around the head centroid (world frame), and
  - on the face side of a jaw plane (tested in the head's local frame),
    which clears the "double chin" left by the body capture's own head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.gaussians import GaussianSet
from ..core.pose import Pose
from ..errors import InvalidInputError


@dataclass(frozen=True)
class PruneConfig:
    sphere_center: np.ndarray   # world, meters
    radius: float
    jaw_point: np.ndarray       # head frame
    jaw_normal: np.ndarray      # head frame, unit, points toward the face
    border_count: int = 0
    period: int = 100           # joint-fitting mode; inference prunes once

    def __post_init__(self) -> None:
        for name in ("sphere_center", "jaw_point", "jaw_normal"):
            vec = np.asarray(getattr(self, name), dtype=np.float64)
            if vec.shape != (3,) or not np.isfinite(vec).all():
                raise InvalidInputError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, vec)
        if not self.radius > 0:
            raise InvalidInputError("prune radius must be positive")
        if abs(np.linalg.norm(self.jaw_normal) - 1.0) > 1e-6:
            raise InvalidInputError("jaw_normal must be unit length")
        if self.border_count < 0:
            raise InvalidInputError("border_count must be non-negative")
        if self.period <= 0:
            raise InvalidInputError("prune period must be positive")


def default_prune_config(head: GaussianSet, jaw_point, jaw_normal,
                         border_count: int = 0, period: int = 100) -> PruneConfig:
    """Sphere defaults from the head set: center = centroid of means,
    radius = 0.9 x head bounding-sphere radius about that centroid."""
    if head.count == 0:
        raise InvalidInputError("cannot derive prune sphere from an empty head")
    center = head.means.mean(axis=0)
    bounding = float(np.linalg.norm(head.means - center, axis=1).max())
    if bounding <= 0:
        raise InvalidInputError("head means are coincident; no bounding sphere")
    return PruneConfig(sphere_center=center, radius=0.9 * bounding,
                       jaw_point=jaw_point, jaw_normal=jaw_normal,
                       border_count=border_count, period=period)


def prune_mask(body: GaussianSet, cfg: PruneConfig,
               head_frame_pose: Pose) -> np.ndarray:
    """Boolean mask of body splats to remove: strictly inside the sphere OR
    strictly on the face side of the jaw plane."""
    dist = np.linalg.norm(body.means - cfg.sphere_center, axis=1)
    in_sphere = dist < cfg.radius
    local = head_frame_pose.inverse().apply(body.means)
    face_side = (local - cfg.jaw_point) @ cfg.jaw_normal > 0.0
    return in_sphere | face_side


def prune_body(body: GaussianSet, cfg: PruneConfig,
               head_frame_pose: Pose) -> tuple[GaussianSet, np.ndarray]:
    """Return (survivors in original order, removed indices)."""
    removed = prune_mask(body, cfg, head_frame_pose)
    survivors = body.take(np.nonzero(~removed)[0])
    return survivors, np.nonzero(removed)[0]
