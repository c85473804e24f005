"""Cross-setup rigid alignment of the head model into the body's world.

Head and body come from separate captures (worlds w1 and w2). Both trackers
place the face into a shared canonical frame, which closes the chain: the
learned head geometry in w1 maps to the observed head at body frame i in w2
through the five-factor rigid transform

    T_i = C_ref_w2^-1 . H_i_w2 . H_ref_w2 . H_ref_w1^-1 . C_ref_w1

where C_ref are the trackers' reference world origins and H_ref / H_i the
reference and per-frame head poses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..core.gaussians import GaussianSet
from ..core.pose import Pose
from ..core.quaternion import quat_multiply, rotmat_to_quat
from ..errors import InvalidInputError


@dataclass
class RigAlignment:
    c_ref_w1: Pose
    c_ref_w2: Pose
    h_ref_w1: Pose
    h_ref_w2: Pose
    h_i_w2: list[Pose]   # per body frame

    def __post_init__(self) -> None:
        if not self.h_i_w2:
            raise InvalidInputError("rig needs at least one per-frame head pose")

    @property
    def n_frames(self) -> int:
        return len(self.h_i_w2)

    @staticmethod
    def identity(n_frames: int = 1) -> "RigAlignment":
        eye = Pose.identity()
        return RigAlignment(c_ref_w1=eye, c_ref_w2=eye, h_ref_w1=eye,
                            h_ref_w2=eye, h_i_w2=[eye] * n_frames)


def composed_transform(rig: RigAlignment, frame: int) -> Pose:
    """The single rigid transform taking w1 head geometry to w2 frame i."""
    if not 0 <= frame < rig.n_frames:
        raise InvalidInputError(
            f"frame {frame} outside rig range 0..{rig.n_frames - 1}")
    return (rig.c_ref_w2.inverse()
            .compose(rig.h_i_w2[frame])
            .compose(rig.h_ref_w2)
            .compose(rig.h_ref_w1.inverse())
            .compose(rig.c_ref_w1))


def transform_set(splats: GaussianSet, pose: Pose) -> GaussianSet:
    """Rigidly transform a splat set: means mapped, quaternions rotated by
    the rotation block (covariances follow as R S R^T), scales unchanged.

    SH coefficients above degree 0 are carried over unrotated; directional
    color is only exact for degree-0 sets.
    """
    rot_quat = rotmat_to_quat(pose.rotation)
    return replace(
        splats,
        means=pose.apply(splats.means),
        rotations=quat_multiply(rot_quat, splats.rotations),
        scale_logs=splats.scale_logs.copy(),
        opacity_logits=splats.opacity_logits.copy(),
        sh_coeffs=splats.sh_coeffs.copy(),
    )


def align_head_to_body(rig: RigAlignment, head, frame: int):
    """Apply the composed transform of `frame` to points (N,3) or a set."""
    pose = composed_transform(rig, frame)
    if isinstance(head, GaussianSet):
        return transform_set(head, pose)
    pts = np.asarray(head, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidInputError("points must have shape (N, 3)")
    return pose.apply(pts)
