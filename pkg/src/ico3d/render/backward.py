"""Analytic L1-loss gradients through the oracle renderer.

Gradient scope: per-splat evaluated color, activated opacity, and 3D mean
(not rotation/scale). The mean gradient flows through both the projected
screen position and the perspective Jacobian inside the 2D covariance; the
view-direction dependence of SH color is not part of the chain (the color is
the leaf), so mean finite-difference checks should use degree-0 color.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.camera import CameraModel
from ..core.gaussians import GaussianSet
from ..errors import InvalidInputError
from . import kernels
from .project import project
from .rasterizer import _as_bg


@dataclass
class RenderGrads:
    loss: float
    color: np.ndarray    # (N, 3) d loss / d evaluated RGB
    opacity: np.ndarray  # (N,)   d loss / d activated opacity
    mean: np.ndarray     # (N, 3) d loss / d world-space mean


def oracle_backward(splats: GaussianSet, cam: CameraModel,
                    target: np.ndarray | None = None,
                    background=(0.0, 0.0, 0.0), *, sh_degree: int | None = None,
                    grad_image: np.ndarray | None = None,
                    color_override: np.ndarray | None = None,
                    opacity_override: np.ndarray | None = None) -> RenderGrads:
    """Gradients through the oracle renderer.

    Exactly one of `target` (built-in L1 loss, loss value reported) or
    `grad_image` (upstream dL/dC per pixel for an external loss; loss
    reported as 0.0) must be given.
    """
    if (target is None) == (grad_image is None):
        raise InvalidInputError("pass exactly one of target or grad_image")
    use_ext = grad_image is not None
    img = grad_image if use_ext else target
    img = np.ascontiguousarray(img, dtype=np.float64)
    if img.shape != (cam.height, cam.width, 3):
        raise InvalidInputError("image dimensions do not match the camera")
    bg = _as_bg(background)
    n = splats.count
    proj = project(splats, cam, sh_degree=sh_degree, aux=True,
                   color_override=color_override, opacity_override=opacity_override)
    m = proj.count
    grad_color = np.zeros((n, 3))
    grad_opacity = np.zeros(n)
    grad_mean = np.zeros((n, 3))
    if m == 0:
        loss = 0.0
        if not use_ext:
            loss = float(np.abs(bg[None, None, :] - img).mean())
        return RenderGrads(loss=loss, color=grad_color,
                           opacity=grad_opacity, mean=grad_mean)

    inv_norm = 1.0 / (3.0 * cam.height * cam.width)
    dummy = np.zeros((1, 1, 3))
    g_rgb = np.zeros((m, 3))
    g_opacity = np.zeros(m)
    g_mean2d = np.zeros((m, 2))
    g_conic = np.zeros((m, 3))
    loss_out = np.zeros(1)
    kernels.backward_oracle(cam.height, cam.width, proj.mean2d, proj.conic,
                            proj.opacity, proj.rgb, bg,
                            dummy if use_ext else img, inv_norm,
                            use_ext, img if use_ext else dummy,
                            g_rgb, g_opacity, g_mean2d, g_conic, loss_out)

    # conic -> packed 2D covariance: Lambda = Sigma2D^-1, so
    # dL/dSigma = -Lambda G Lambda with G the full-matrix conic gradient.
    lam = np.empty((m, 2, 2))
    lam[:, 0, 0] = proj.conic[:, 0]
    lam[:, 0, 1] = lam[:, 1, 0] = proj.conic[:, 1]
    lam[:, 1, 1] = proj.conic[:, 2]
    gfull = np.empty((m, 2, 2))
    gfull[:, 0, 0] = g_conic[:, 0]
    gfull[:, 0, 1] = gfull[:, 1, 0] = 0.5 * g_conic[:, 1]
    gfull[:, 1, 1] = g_conic[:, 2]
    g_cov = -np.einsum("nij,njk,nkl->nil", lam, gfull, lam)

    # Mean chain: screen position term plus the Jacobian term of
    # Sigma2D = J (W Sigma W^T) J^T. U = V J^T; dJ/dt_k contracts against U.
    t = proj.t_cam
    tz = t[:, 2]
    fx, fy = cam.fx, cam.fy
    u_mat = np.einsum("nij,nkj->nik", proj.vmat, proj.jac)  # (m, 3, 2)

    g_t = np.zeros((m, 3))
    g_t[:, 0] = g_mean2d[:, 0] * fx / tz
    g_t[:, 1] = g_mean2d[:, 1] * fy / tz
    g_t[:, 2] = (-g_mean2d[:, 0] * fx * t[:, 0] / tz ** 2
                 - g_mean2d[:, 1] * fy * t[:, 1] / tz ** 2)

    # d/dt_x: only J[0,2] moves (-fx/tz^2); Term = outer(e0, -fx/tz^2 * U[2,:])
    coeff_x = -fx / tz ** 2
    g_t[:, 0] += 2.0 * coeff_x * (g_cov[:, 0, 0] * u_mat[:, 2, 0]
                                  + g_cov[:, 0, 1] * u_mat[:, 2, 1])
    coeff_y = -fy / tz ** 2
    g_t[:, 1] += 2.0 * coeff_y * (g_cov[:, 1, 0] * u_mat[:, 2, 0]
                                  + g_cov[:, 1, 1] * u_mat[:, 2, 1])
    # d/dt_z: J[0,0] -> -fx/tz^2, J[1,1] -> -fy/tz^2,
    #         J[0,2] -> 2 fx tx/tz^3, J[1,2] -> 2 fy ty/tz^3
    row0 = (coeff_x[:, None] * u_mat[:, 0, :]
            + (2.0 * fx * t[:, 0] / tz ** 3)[:, None] * u_mat[:, 2, :])
    row1 = (coeff_y[:, None] * u_mat[:, 1, :]
            + (2.0 * fy * t[:, 1] / tz ** 3)[:, None] * u_mat[:, 2, :])
    g_t[:, 2] += 2.0 * (g_cov[:, 0, 0] * row0[:, 0] + g_cov[:, 0, 1] * row0[:, 1]
                        + g_cov[:, 1, 0] * row1[:, 0] + g_cov[:, 1, 1] * row1[:, 1])

    g_mu = g_t @ cam.rotation

    grad_color[proj.index] = g_rgb
    grad_opacity[proj.index] = g_opacity
    grad_mean[proj.index] = g_mu
    return RenderGrads(loss=float(loss_out[0]), color=grad_color,
                       opacity=grad_opacity, mean=grad_mean)
