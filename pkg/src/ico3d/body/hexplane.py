"""Hexplane spatio-temporal feature encoder.

A query (mu, t) with mu in [0,1]^3 and t in [0,1] is looked up on six 2D
feature planes (xy, xz, yz, xt, yt, zt) by bilinear interpolation. Per
resolution, the six plane features are fused by elementwise product; the
per-resolution features are concatenated, so the output dimension is
len(resolutions) * feature_dim.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError

PLANES = ("xy", "xz", "yz", "xt", "yt", "zt")
# Query coordinate pair feeding each plane: indices into (x, y, z, t).
_PLANE_AXES = ((0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3))
DEFAULT_RESOLUTIONS = (32, 64)
DEFAULT_FEATURE_DIM = 16


@dataclass
class HexplaneEncoder:
    """grids[r][p]: feature plane of shape (R_r, R_r, feature_dim) for
    resolution index r and plane index p (ordered as PLANES)."""

    resolutions: tuple[int, ...]
    feature_dim: int
    grids: list[list[np.ndarray]]

    def __post_init__(self) -> None:
        self.resolutions = tuple(int(r) for r in self.resolutions)
        if not self.resolutions or any(r < 2 for r in self.resolutions):
            raise InvalidInputError("resolutions must all be >= 2")
        if self.feature_dim < 1:
            raise InvalidInputError("feature_dim must be >= 1")
        if len(self.grids) != len(self.resolutions):
            raise InvalidInputError("one grid list per resolution required")
        for r_idx, res in enumerate(self.resolutions):
            planes = self.grids[r_idx]
            if len(planes) != len(PLANES):
                raise InvalidInputError(f"resolution {res} needs {len(PLANES)} planes")
            for p_idx in range(len(PLANES)):
                grid = np.ascontiguousarray(planes[p_idx], dtype=np.float64)
                if grid.shape != (res, res, self.feature_dim):
                    raise InvalidInputError(
                        f"plane {PLANES[p_idx]} at resolution {res} has shape "
                        f"{grid.shape}, expected {(res, res, self.feature_dim)}")
                planes[p_idx] = grid

    @property
    def out_dim(self) -> int:
        return len(self.resolutions) * self.feature_dim

    def copy(self) -> "HexplaneEncoder":
        return HexplaneEncoder(
            resolutions=self.resolutions,
            feature_dim=self.feature_dim,
            grids=[[g.copy() for g in planes] for planes in self.grids],
        )


def new_encoder(rng: np.random.Generator,
                resolutions: tuple[int, ...] = DEFAULT_RESOLUTIONS,
                feature_dim: int = DEFAULT_FEATURE_DIM,
                init_scale: float = 0.1) -> HexplaneEncoder:
    """Grids initialized near 1 so the six-plane product starts well scaled."""
    grids = [[1.0 + init_scale * rng.standard_normal((res, res, feature_dim))
              for _ in PLANES] for res in resolutions]
    return HexplaneEncoder(resolutions=resolutions, feature_dim=feature_dim,
                           grids=grids)


def _bilinear(grid: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample (R,R,F) at normalized coordinates u,v in [0,1]; nodes sit at
    k/(R-1). Returns (n, F)."""
    res = grid.shape[0]
    x = u * (res - 1)
    y = v * (res - 1)
    i0 = np.clip(np.floor(x).astype(np.int64), 0, res - 2)
    j0 = np.clip(np.floor(y).astype(np.int64), 0, res - 2)
    fx = (x - i0)[:, None]
    fy = (y - j0)[:, None]
    g00 = grid[i0, j0]
    g10 = grid[i0 + 1, j0]
    g01 = grid[i0, j0 + 1]
    g11 = grid[i0 + 1, j0 + 1]
    return ((1 - fx) * (1 - fy) * g00 + fx * (1 - fy) * g10
            + (1 - fx) * fy * g01 + fx * fy * g11)


def st_encode(encoder: HexplaneEncoder, mu: np.ndarray, t: float) -> np.ndarray:
    """Spatio-temporal features for normalized positions and time.

    mu: (3,) or (n, 3) in [0,1]; t: scalar in [0,1]. Coordinates outside the
    unit range are clamped with a warning. Returns (out_dim,) or (n, out_dim).
    """
    mu = np.asarray(mu, dtype=np.float64)
    if not np.isfinite(mu).all() or not np.isfinite(t):
        raise InvalidInputError("st_encode inputs must be finite")
    single = mu.ndim == 1
    pts = np.atleast_2d(mu)
    if pts.shape[1] != 3:
        raise InvalidInputError(f"expected 3-vectors, got shape {mu.shape}")
    coords = np.concatenate(
        [pts, np.full((pts.shape[0], 1), float(t))], axis=1)
    if coords.size and (coords.min() < 0.0 or coords.max() > 1.0):
        warnings.warn("st_encode query outside [0,1]; clamping", stacklevel=2)
        coords = np.clip(coords, 0.0, 1.0)
    parts = []
    for r_idx in range(len(encoder.resolutions)):
        fused = np.ones((pts.shape[0], encoder.feature_dim))
        for p_idx, (a, b) in enumerate(_PLANE_AXES):
            fused *= _bilinear(encoder.grids[r_idx][p_idx],
                               coords[:, a], coords[:, b])
        parts.append(fused)
    out = np.concatenate(parts, axis=1)
    return out[0] if single else out
