"""Temporal-consistency fine-tuning across window seams.

Windows are fine-tuned sequentially: the previous window stays frozen and
provides the target render on the shared boundary frame. Three of every four
iterations take a consistency step on an interpolated novel view; the fourth
takes a reconstruction step against supplied ground-truth frames. Updates
reach only the canonical color (degree-0 SH), opacity, and mean of the
current window; the deformation MLP, encoder, and blend stay fixed, and the
mean gradient is applied straight through the deformation field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.camera import CameraModel
from ..core.gaussians import GaussianSet
from ..core.pose import Pose, interpolate_pose
from ..core.sh import C0, sh_basis
from ..errors import DivergenceError, InvalidInputError
from ..render.backward import oracle_backward
from ..render.metrics import l1 as l1_metric
from ..render.metrics import ssim_with_grad
from ..render.rasterizer import render_oracle
from .model import WindowModel, deform

PARAM_NAMES = ("dc", "opacity_logits", "means")


@dataclass
class BodyFitConfig:
    lr_color: float = 2e-3
    lr_opacity: float = 2e-3
    lr_mean: float = 1e-4
    lambda_l1: float = 0.8      # reconstruction-step L1 weight
    lambda_ssim: float = 0.2    # reconstruction-step (1 - SSIM) weight
    background: tuple = (0.0, 0.0, 0.0)

    def lr_of(self, name: str) -> float:
        return {"dc": self.lr_color, "opacity_logits": self.lr_opacity,
                "means": self.lr_mean}[name]


def _check_overlap(window_w: WindowModel, window_prev: WindowModel) -> None:
    if window_w.frame_range[0] != window_prev.frame_range[1]:
        raise InvalidInputError(
            f"windows do not overlap by 1 frame: prev ends at "
            f"{window_prev.frame_range[1]}, current starts at "
            f"{window_w.frame_range[0]}")


def consistency_loss(window_w: WindowModel, window_prev: WindowModel,
                     cam: CameraModel, background=(0.0, 0.0, 0.0)) -> float:
    """L1 between the current window at t=0 and the previous at its last
    frame, rendered from the same camera."""
    _check_overlap(window_w, window_prev)
    img_w = render_oracle(deform(window_w, 0.0), cam, background).rgb
    img_prev = render_oracle(deform(window_prev, 1.0), cam, background).rgb
    return l1_metric(img_w, img_prev)


class _Adam:
    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr_of):
        self.t += 1
        for k, p in params.items():
            g = grads[k]
            self.m[k] = 0.9 * self.m[k] + 0.1 * g
            self.v[k] = 0.999 * self.v[k] + 0.001 * g * g
            mhat = self.m[k] / (1 - 0.9 ** self.t)
            vhat = self.v[k] / (1 - 0.999 ** self.t)
            p -= lr_of(k) * mhat / (np.sqrt(vhat) + 1e-8)


def _clamp_gate(dset: GaussianSet, cam: CameraModel) -> np.ndarray:
    """(N,3) mask: 1 where the evaluated color sits strictly inside (0,1),
    so the clamp in eval_sh passes gradient through."""
    dirs = dset.means - cam.center
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs = np.divide(dirs, norms, out=np.zeros_like(dirs), where=norms > 1e-12)
    basis = sh_basis(dirs, dset.sh_degree)
    raw = np.einsum("nk,nkc->nc", basis, dset.sh_coeffs) + 0.5
    return ((raw > 0.0) & (raw < 1.0)).astype(np.float64)


def _render_step_grads(window: WindowModel, t: float, cam: CameraModel,
                       target: np.ndarray, background,
                       lambda_l1: float, lambda_ssim: float):
    """Image loss and canonical-parameter gradients at one (t, camera).

    lambda_ssim = 0 gives the pure-L1 consistency objective.
    """
    dset = deform(window, t)
    img = render_oracle(dset, cam, background).rgb
    l1_val = l1_metric(img, target)
    if lambda_ssim:
        ssim_val, ssim_grad = ssim_with_grad(img, target)
        loss = lambda_l1 * l1_val + lambda_ssim * (1.0 - ssim_val)
        g_img = (lambda_l1 * np.sign(img - target) / img.size
                 - lambda_ssim * ssim_grad)
    else:
        loss = lambda_l1 * l1_val
        g_img = lambda_l1 * np.sign(img - target) / img.size
    rg = oracle_backward(dset, cam, grad_image=g_img, background=background)
    op = dset.opacities
    grads = {
        # d eval_rgb / d dc coefficient = C0 where the clamp is inactive
        "dc": rg.color * C0 * _clamp_gate(dset, cam),
        "opacity_logits": rg.opacity * op * (1.0 - op),
        # straight-through: canonical mean receives the deformed-mean gradient
        "means": rg.mean,
    }
    return loss, grads


@dataclass
class FinetuneTrace:
    kinds: list[str] = field(default_factory=list)    # "consistency" | "recon"
    losses: list[float] = field(default_factory=list)

    def fraction(self, kind: str) -> float:
        if not self.kinds:
            return 0.0
        return sum(k == kind for k in self.kinds) / len(self.kinds)


def finetune_window(window_w: WindowModel, window_prev: WindowModel,
                    cameras: list[CameraModel], iters: int,
                    recon_data: list, rng: np.random.Generator,
                    config: BodyFitConfig | None = None):
    """Fine-tune the current window against its frozen predecessor.

    recon_data entries are (t, CameraModel, target image) with t the
    normalized window time. Iterations cycle consistency, consistency,
    consistency, reconstruction (75% / 25%). Consistency steps interpolate a
    novel view from `cameras` with simplex-uniform weights and match the
    previous window's boundary render. Returns (updated window, trace);
    inputs are left untouched.
    """
    _check_overlap(window_w, window_prev)
    if not cameras:
        raise InvalidInputError("finetune_window needs at least one camera")
    if not recon_data:
        raise InvalidInputError("finetune_window needs reconstruction frames")
    cfg = config or BodyFitConfig()

    window = window_w.copy()
    can = window.canonical
    params = {
        "dc": can.sh_coeffs[:, 0, :],      # degree-0 band, updated in place
        "opacity_logits": can.opacity_logits,
        "means": can.means,
    }
    opt = _Adam(params)
    poses = [Pose(cam.world_to_camera) for cam in cameras]
    trace = FinetuneTrace()
    recon_cursor = 0
    for it in range(iters):
        if it % 4 != 3:
            beta = rng.dirichlet(np.ones(len(poses)))
            novel = cameras[0].with_pose(interpolate_pose(poses, beta).matrix)
            target = render_oracle(deform(window_prev, 1.0), novel,
                                   cfg.background).rgb
            loss, grads = _render_step_grads(window, 0.0, novel, target,
                                             cfg.background, 1.0, 0.0)
            kind = "consistency"
        else:
            t, cam, target = recon_data[recon_cursor % len(recon_data)]
            recon_cursor += 1
            loss, grads = _render_step_grads(window, float(t), cam, target,
                                             cfg.background, cfg.lambda_l1,
                                             cfg.lambda_ssim)
            kind = "recon"
        if not np.isfinite(loss):
            raise DivergenceError(
                f"{kind} loss became non-finite at iteration {it}")
        trace.kinds.append(kind)
        trace.losses.append(float(loss))
        opt.step(params, grads, cfg.lr_of)
        for name, p in params.items():
            if not np.isfinite(p).all():
                raise DivergenceError(
                    f"canonical {name} became non-finite at iteration {it}")
    return window, trace
