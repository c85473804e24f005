"""EWA projection of 3D splats to screen-space 2D Gaussians.

Pixel (ix, iy) is sampled exactly at coordinates (ix, iy). A splat's pixel
radius bounds the region where its alpha contribution can reach 1/255, so
tile culling and the exhaustive oracle provably agree: everything outside the
radius is skipped by the alpha threshold in both renderers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.camera import CameraModel
from ..core.gaussians import GaussianSet
from ..core.quaternion import build_covariances
from ..core.sh import eval_sh

NEAR_PLANE = 0.01
LOW_PASS = 0.3  # px^2 added to the 2D covariance diagonal
ALPHA_MIN = 1.0 / 255.0
T_MIN = 1e-4
# alpha = o * exp(-q/2) >= 1/255 with o <= 1 requires the Mahalanobis radius
# sqrt(2 ln 255); scaled by sqrt(lambda_max) it bounds the pixel footprint.
RADIUS_FACTOR = float(np.sqrt(2.0 * np.log(255.0)))


@dataclass
class ProjectedSplats:
    """Depth-sorted screen-space splats (structure of arrays).

    Arrays are ordered by ascending view-space depth with ties broken by the
    original input index; `index` maps each row back to the source splat.
    """

    mean2d: np.ndarray        # (M, 2) pixel coordinates
    cov2d: np.ndarray         # (M, 3) packed symmetric [a, b, c]
    conic: np.ndarray         # (M, 3) packed inverse covariance
    depth: np.ndarray         # (M,) view-space z, meters
    opacity: np.ndarray       # (M,) activated
    rgb: np.ndarray           # (M, 3) evaluated color
    radius: np.ndarray        # (M,) integer pixel radius
    index: np.ndarray         # (M,) original splat index
    culled: int = 0
    # Auxiliary projection state kept for the gradient chain.
    t_cam: np.ndarray | None = None    # (M, 3) camera-space means
    vmat: np.ndarray | None = None     # (M, 3, 3) W Sigma W^T
    jac: np.ndarray | None = None      # (M, 2, 3) perspective Jacobian

    @property
    def count(self) -> int:
        return self.mean2d.shape[0]


def project(splats: GaussianSet, cam: CameraModel, *, sh_degree: int | None = None,
            color_override: np.ndarray | None = None,
            opacity_override: np.ndarray | None = None,
            aux: bool = False) -> ProjectedSplats:
    """Project a splat set through a camera, culling near-plane and
    off-viewport splats. Optional per-splat color/opacity overrides replace
    the SH evaluation (used by the expression-driven head)."""
    n = splats.count
    if n == 0:
        z2 = np.zeros((0, 2))
        z3 = np.zeros((0, 3))
        return ProjectedSplats(mean2d=z2, cov2d=z3, conic=z3, depth=np.zeros(0),
                               opacity=np.zeros(0), rgb=z3,
                               radius=np.zeros(0, dtype=np.int64),
                               index=np.zeros(0, dtype=np.int64), culled=0)

    rot = cam.rotation
    t_all = splats.means @ rot.T + cam.translation
    in_front = t_all[:, 2] > NEAR_PLANE
    idx = np.nonzero(in_front)[0]
    t = t_all[idx]
    tz = t[:, 2]

    fx, fy = cam.fx, cam.fy
    mean2d = np.stack([fx * t[:, 0] / tz + cam.cx,
                       fy * t[:, 1] / tz + cam.cy], axis=1)

    cov3d = build_covariances(splats.rotations[idx], splats.scales[idx])
    vmat = np.einsum("ij,njk,lk->nil", rot, cov3d, rot)
    jac = np.zeros((len(idx), 2, 3))
    jac[:, 0, 0] = fx / tz
    jac[:, 0, 2] = -fx * t[:, 0] / tz ** 2
    jac[:, 1, 1] = fy / tz
    jac[:, 1, 2] = -fy * t[:, 1] / tz ** 2
    cov2d_full = np.einsum("nij,njk,nlk->nil", jac, vmat, jac)
    a = cov2d_full[:, 0, 0] + LOW_PASS
    b = cov2d_full[:, 0, 1]
    c = cov2d_full[:, 1, 1] + LOW_PASS

    mid = 0.5 * (a + c)
    disc = np.sqrt(np.maximum(0.0, (0.5 * (a - c)) ** 2 + b ** 2))
    lam_max = mid + disc
    radius = np.ceil(RADIUS_FACTOR * np.sqrt(lam_max)).astype(np.int64) + 1

    visible = ((mean2d[:, 0] + radius >= 0) & (mean2d[:, 0] - radius <= cam.width - 1)
               & (mean2d[:, 1] + radius >= 0) & (mean2d[:, 1] - radius <= cam.height - 1))
    keep = np.nonzero(visible)[0]
    idx = idx[keep]
    mean2d, t, tz = mean2d[keep], t[keep], tz[keep]
    a, b, c, radius = a[keep], b[keep], c[keep], radius[keep]
    vmat, jac = vmat[keep], jac[keep]

    det = a * c - b * b
    conic = np.stack([c / det, -b / det, a / det], axis=1)
    cov2d = np.stack([a, b, c], axis=1)

    opacity = (splats.opacities if opacity_override is None
               else np.asarray(opacity_override, dtype=np.float64))[idx]
    if color_override is None:
        deg = splats.sh_degree if sh_degree is None else min(sh_degree, splats.sh_degree)
        dirs = splats.means[idx] - cam.center
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs = np.divide(dirs, norms, out=np.zeros_like(dirs), where=norms > 1e-12)
        k = (deg + 1) ** 2
        rgb = eval_sh(splats.sh_coeffs[idx, :k, :], dirs, deg)
    else:
        rgb = np.ascontiguousarray(color_override, dtype=np.float64)[idx]

    order = np.lexsort((idx, tz))
    out = ProjectedSplats(
        mean2d=np.ascontiguousarray(mean2d[order]),
        cov2d=np.ascontiguousarray(cov2d[order]),
        conic=np.ascontiguousarray(conic[order]),
        depth=np.ascontiguousarray(tz[order]),
        opacity=np.ascontiguousarray(opacity[order]),
        rgb=np.ascontiguousarray(rgb[order]),
        radius=np.ascontiguousarray(radius[order]),
        index=np.ascontiguousarray(idx[order]),
        culled=n - len(idx),
    )
    if aux:
        out.t_cam = np.ascontiguousarray(t[order])
        out.vmat = np.ascontiguousarray(vmat[order])
        out.jac = np.ascontiguousarray(jac[order])
    return out
