"""Tile-based Gaussian splatting: projection, rasterization, gradients, metrics."""

from .backward import RenderGrads, oracle_backward
from .image_io import read_pfm, read_png, to_uint8, write_pfm, write_png
from .metrics import l1, metrics, psnr, psnr_masked, ssim, ssim_with_grad
from .project import (
    ALPHA_MIN,
    LOW_PASS,
    NEAR_PLANE,
    RADIUS_FACTOR,
    T_MIN,
    ProjectedSplats,
    project,
)
from .rasterizer import (
    RenderedFrame,
    RenderStats,
    bin_tiles,
    render_oracle,
    render_tiled,
    warmup_kernels,
)

__all__ = [
    "ALPHA_MIN",
    "LOW_PASS",
    "NEAR_PLANE",
    "RADIUS_FACTOR",
    "T_MIN",
    "ProjectedSplats",
    "RenderGrads",
    "RenderStats",
    "RenderedFrame",
    "bin_tiles",
    "l1",
    "metrics",
    "oracle_backward",
    "project",
    "psnr",
    "psnr_masked",
    "read_pfm",
    "read_png",
    "render_oracle",
    "render_tiled",
    "ssim",
    "ssim_with_grad",
    "to_uint8",
    "warmup_kernels",
    "write_pfm",
    "write_png",
]
