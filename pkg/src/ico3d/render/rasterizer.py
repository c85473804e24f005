"""Tile-based rasterizer and the exhaustive per-pixel oracle renderer.

Both consume the same projection (`project`) and the same compositing math
(`kernels`); they differ only in which splats each pixel visits. The tiled
path bins splats into 16x16 pixel tiles by conservative radius and is
data-parallel over tiles: with workers > 1, contiguous tile ranges are
rendered from a thread pool (the kernels release the GIL), each tile writing
a disjoint region of the output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core.camera import CameraModel
from ..core.gaussians import GaussianSet
from . import kernels
from .kernels import TILE
from .project import ProjectedSplats, project


@dataclass
class RenderStats:
    culled: int
    total_splats: int
    splats_per_tile: np.ndarray | None  # (tiles_y, tiles_x) or None for oracle


@dataclass
class RenderedFrame:
    rgb: np.ndarray     # (H, W, 3) linear float in [0,1]
    alpha: np.ndarray   # (H, W) accumulated opacity
    stats: RenderStats


def _as_bg(background) -> np.ndarray:
    bg = np.asarray(background, dtype=np.float64).reshape(-1)
    if bg.size == 1:
        bg = np.repeat(bg, 3)
    if bg.shape != (3,):
        raise ValueError("background must be a scalar or RGB triple")
    return np.ascontiguousarray(bg)


def bin_tiles(proj: ProjectedSplats, width: int, height: int):
    """Depth-ordered splat rows per tile: (tile_ranges (T+1,), tile_order)."""
    ntx = (width + TILE - 1) // TILE
    nty = (height + TILE - 1) // TILE
    n_tiles = ntx * nty
    m = proj.count
    if m == 0:
        return ntx, nty, np.zeros(n_tiles + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    mx, my = proj.mean2d[:, 0], proj.mean2d[:, 1]
    r = proj.radius.astype(np.float64)
    tx0 = np.clip(np.floor((mx - r) / TILE), 0, ntx - 1).astype(np.int64)
    tx1 = np.clip(np.floor((mx + r) / TILE), 0, ntx - 1).astype(np.int64)
    ty0 = np.clip(np.floor((my - r) / TILE), 0, nty - 1).astype(np.int64)
    ty1 = np.clip(np.floor((my + r) / TILE), 0, nty - 1).astype(np.int64)
    counts = (tx1 - tx0 + 1) * (ty1 - ty0 + 1)
    offsets = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    tile_ids = np.empty(total, dtype=np.int64)
    ranks = np.empty(total, dtype=np.int64)
    kernels.expand_tile_ids(tx0, tx1, ty0, ty1, offsets[:-1], ntx, tile_ids, ranks)
    # Sort by (tile, depth rank); keys are unique so the order is total.
    order = np.argsort(tile_ids * np.int64(m) + ranks)
    tile_ids = tile_ids[order]
    tile_order = ranks[order]
    tile_ranges = np.searchsorted(tile_ids, np.arange(n_tiles + 1)).astype(np.int64)
    return ntx, nty, tile_ranges, tile_order


def render_tiled(splats: GaussianSet, cam: CameraModel, background=(0.0, 0.0, 0.0),
                 *, workers: int = 1, sh_degree: int | None = None,
                 color_override: np.ndarray | None = None,
                 opacity_override: np.ndarray | None = None) -> RenderedFrame:
    """Front-to-back alpha compositing over depth-sorted splats, tiled."""
    bg = _as_bg(background)
    h, w = cam.height, cam.width
    proj = project(splats, cam, sh_degree=sh_degree,
                   color_override=color_override, opacity_override=opacity_override)
    ntx, nty, tile_ranges, tile_order = bin_tiles(proj, w, h)
    out_rgb = np.empty((h, w, 3), dtype=np.float64)
    out_alpha = np.empty((h, w), dtype=np.float64)
    n_tiles = ntx * nty

    args = (ntx, h, w, tile_ranges, tile_order, proj.mean2d, proj.conic,
            proj.opacity, proj.rgb, bg, out_rgb, out_alpha)
    if workers <= 1 or n_tiles == 1:
        kernels.forward_tiles(0, n_tiles, *args)
    else:
        bounds = np.linspace(0, n_tiles, min(workers, n_tiles) + 1).astype(np.int64)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(kernels.forward_tiles, int(lo), int(hi), *args)
                       for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
            for fut in futures:
                fut.result()

    per_tile = np.diff(tile_ranges).reshape(nty, ntx)
    stats = RenderStats(culled=proj.culled, total_splats=splats.count,
                        splats_per_tile=per_tile)
    return RenderedFrame(rgb=out_rgb, alpha=out_alpha, stats=stats)


def render_oracle(splats: GaussianSet, cam: CameraModel, background=(0.0, 0.0, 0.0),
                  *, sh_degree: int | None = None,
                  color_override: np.ndarray | None = None,
                  opacity_override: np.ndarray | None = None) -> RenderedFrame:
    """Reference renderer: every pixel walks the full depth-sorted splat list."""
    bg = _as_bg(background)
    h, w = cam.height, cam.width
    proj = project(splats, cam, sh_degree=sh_degree,
                   color_override=color_override, opacity_override=opacity_override)
    out_rgb = np.empty((h, w, 3), dtype=np.float64)
    out_alpha = np.empty((h, w), dtype=np.float64)
    kernels.forward_oracle(h, w, proj.mean2d, proj.conic, proj.opacity,
                           proj.rgb, bg, out_rgb, out_alpha)
    stats = RenderStats(culled=proj.culled, total_splats=splats.count,
                        splats_per_tile=None)
    return RenderedFrame(rgb=out_rgb, alpha=out_alpha, stats=stats)


def warmup_kernels() -> None:
    """Compile the numba kernels on a 1-splat scene (excluded from timings)."""
    from ..core.gaussians import random_set
    from ..core.camera import default_camera
    s = random_set(np.random.default_rng(0), 1, sh_degree=0)
    cam = default_camera(width=TILE, height=TILE)
    render_tiled(s, cam)
    render_oracle(s, cam)
