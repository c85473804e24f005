"""Border Gaussians bridging the head-body seam.

New splats are scattered along the neck-boundary polyline (a closed loop of
vertices): each sample sits on a random edge, jittered inside a ball of
radius 0.25 x that edge's length, so every injected mean stays within the
max jitter distance of the polyline. Initialization is isotropic with the
same 0.25-edge extent, opacity 0.5, and color copied from the nearest head
splat; these are engineering defaults, later optimization may move them.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..core.gaussians import GaussianSet
from ..errors import InvalidInputError

JITTER_FACTOR = 0.25
MIN_SCALE = 1e-6


def _unit_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    dirs = rng.normal(size=(n, 3))
    norms = np.linalg.norm(dirs, axis=1)
    while np.any(norms < 1e-9):   # essentially never; keeps the bound hard
        bad = norms < 1e-9
        dirs[bad] = rng.normal(size=(int(bad.sum()), 3))
        norms = np.linalg.norm(dirs, axis=1)
    return dirs / norms[:, None]


def inject_border(head: GaussianSet, boundary_vertices, count: int,
                  rng: np.random.Generator) -> GaussianSet:
    """Return `count` new splats along the boundary loop (append to taste)."""
    verts = np.asarray(boundary_vertices, dtype=np.float64)
    if verts.size == 0:
        raise InvalidInputError("boundary vertex list is empty")
    if verts.ndim != 2 or verts.shape[1] != 3 or not np.isfinite(verts).all():
        raise InvalidInputError("boundary vertices must be finite 3-vectors")
    if head.count == 0:
        raise InvalidInputError("need a nonempty head set to source colors")
    if count < 0:
        raise InvalidInputError("count must be non-negative")
    if count == 0:
        return GaussianSet.empty(head.sh_degree)

    starts = verts
    ends = np.roll(verts, -1, axis=0)   # closed loop
    edge_lens = np.linalg.norm(ends - starts, axis=1)

    edge = rng.integers(0, len(verts), size=count)
    t = rng.uniform(size=count)
    base = starts[edge] + t[:, None] * (ends[edge] - starts[edge])
    sigma = JITTER_FACTOR * edge_lens[edge]
    radii = sigma * rng.uniform(size=count) ** (1.0 / 3.0)   # uniform in ball
    means = base + radii[:, None] * _unit_directions(rng, count)

    nearest = cKDTree(head.means).query(means)[1]
    scale = np.maximum(sigma, MIN_SCALE)
    rotations = np.zeros((count, 4))
    rotations[:, 0] = 1.0
    return GaussianSet(
        means=means,
        rotations=rotations,
        scale_logs=np.repeat(np.log(scale)[:, None], 3, axis=1),
        opacity_logits=np.zeros(count),   # sigmoid(0) = 0.5
        sh_coeffs=head.sh_coeffs[nearest].copy(),
    )
