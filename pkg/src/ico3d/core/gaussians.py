"""GaussianSet: structure-of-arrays splat container.

Storage matches the on-disk convention: log-scales and opacity logits are the
raw fields, activated extents/opacities are exposed as properties. Keeping the
raw parameterization in memory makes save -> load roundtrips bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InvalidInputError
from . import sh as shmod

# sigmoid(40) rounds to 1.0 in float64, sigmoid(-40) to ~4.2e-18; used to
# represent fully opaque / fully transparent splats with finite logits.
_LOGIT_SATURATION = 40.0


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logit(p: np.ndarray) -> np.ndarray:
    """Stable inverse sigmoid, saturating at +-40 for p at the ends of [0,1]."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise InvalidInputError("opacities must lie in [0,1]")
    out = np.empty_like(p)
    hi = p >= 1.0 - 1e-15
    lo = p <= 1e-15
    mid = ~(hi | lo)
    out[hi] = _LOGIT_SATURATION
    out[lo] = -_LOGIT_SATURATION
    out[mid] = np.log(p[mid]) - np.log1p(-p[mid])
    return out


@dataclass
class GaussianSet:
    """Splat primitives: means, unit quaternions (w,x,y,z), raw log-scales,
    raw opacity logits, and SH color coefficients of shape (N, K, 3)."""

    means: np.ndarray
    rotations: np.ndarray
    scale_logs: np.ndarray
    opacity_logits: np.ndarray
    sh_coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.means = np.ascontiguousarray(self.means, dtype=np.float64)
        self.rotations = np.ascontiguousarray(self.rotations, dtype=np.float64)
        self.scale_logs = np.ascontiguousarray(self.scale_logs, dtype=np.float64)
        self.opacity_logits = np.ascontiguousarray(self.opacity_logits, dtype=np.float64)
        self.sh_coeffs = np.ascontiguousarray(self.sh_coeffs, dtype=np.float64)
        self.validate()

    @property
    def count(self) -> int:
        return self.means.shape[0]

    @property
    def scales(self) -> np.ndarray:
        """Activated per-axis extents, strictly positive."""
        return np.exp(self.scale_logs)

    @property
    def opacities(self) -> np.ndarray:
        """Activated opacities in [0,1]."""
        return sigmoid(self.opacity_logits)

    @property
    def sh_degree(self) -> int:
        k = self.sh_coeffs.shape[1]
        deg = int(round(np.sqrt(k))) - 1
        if (deg + 1) ** 2 != k:
            raise InvalidInputError(f"SH coefficient count {k} is not a square")
        return deg

    def validate(self) -> None:
        n = self.means.shape[0] if self.means.ndim == 2 else -1
        if self.means.ndim != 2 or self.means.shape[1] != 3:
            raise InvalidInputError("means must have shape (N, 3)")
        if self.rotations.shape != (n, 4):
            raise InvalidInputError("rotations must have shape (N, 4)")
        if self.scale_logs.shape != (n, 3):
            raise InvalidInputError("scale_logs must have shape (N, 3)")
        if self.opacity_logits.shape != (n,):
            raise InvalidInputError("opacity_logits must have shape (N,)")
        if self.sh_coeffs.ndim != 3 or self.sh_coeffs.shape[0] != n or self.sh_coeffs.shape[2] != 3:
            raise InvalidInputError("sh_coeffs must have shape (N, K, 3)")
        self.sh_degree  # validates K is a perfect square
        for name in ("means", "rotations", "scale_logs", "opacity_logits", "sh_coeffs"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidInputError(f"{name} contains NaN/Inf")
        if n:
            norms = np.linalg.norm(self.rotations, axis=1)
            worst = float(np.abs(norms - 1.0).max())
            if worst > 1e-6:
                raise InvalidInputError(
                    f"rotation quaternions deviate from unit norm by {worst:.3e} (> 1e-6)")

    @staticmethod
    def from_activated(means, rotations, scales, opacities, sh_coeffs) -> "GaussianSet":
        """Build from activated scales/opacities (converted to logs/logits)."""
        scales = np.asarray(scales, dtype=np.float64)
        if np.any(scales <= 0):
            raise InvalidInputError("scales must be strictly positive")
        return GaussianSet(
            means=np.asarray(means, dtype=np.float64),
            rotations=np.asarray(rotations, dtype=np.float64),
            scale_logs=np.log(scales),
            opacity_logits=logit(opacities),
            sh_coeffs=np.asarray(sh_coeffs, dtype=np.float64),
        )

    @staticmethod
    def empty(sh_degree: int = 0) -> "GaussianSet":
        k = shmod.num_coeffs(sh_degree)
        return GaussianSet(
            means=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)),
            scale_logs=np.zeros((0, 3)),
            opacity_logits=np.zeros((0,)),
            sh_coeffs=np.zeros((0, k, 3)),
        )

    def with_sh_degree(self, degree: int) -> "GaussianSet":
        """Zero-pad (or reject truncation of) SH coefficients to a degree."""
        k = shmod.num_coeffs(degree)
        cur = self.sh_coeffs.shape[1]
        if k == cur:
            return self
        if k < cur:
            raise InvalidInputError("lowering SH degree would discard coefficients")
        padded = np.zeros((self.count, k, 3), dtype=np.float64)
        padded[:, :cur, :] = self.sh_coeffs
        return replace(self, sh_coeffs=padded)

    def take(self, indices: np.ndarray) -> "GaussianSet":
        idx = np.asarray(indices)
        return GaussianSet(
            means=self.means[idx],
            rotations=self.rotations[idx],
            scale_logs=self.scale_logs[idx],
            opacity_logits=self.opacity_logits[idx],
            sh_coeffs=self.sh_coeffs[idx],
        )

    def copy(self) -> "GaussianSet":
        return GaussianSet(
            means=self.means.copy(),
            rotations=self.rotations.copy(),
            scale_logs=self.scale_logs.copy(),
            opacity_logits=self.opacity_logits.copy(),
            sh_coeffs=self.sh_coeffs.copy(),
        )


def concat(a: GaussianSet, b: GaussianSet) -> GaussianSet:
    """Concatenate two sets; indices of `a` precede those of `b`.

    SH degrees are reconciled by zero-padding the lower-degree set.
    """
    deg = max(a.sh_degree, b.sh_degree)
    a = a.with_sh_degree(deg)
    b = b.with_sh_degree(deg)
    return GaussianSet(
        means=np.concatenate([a.means, b.means]),
        rotations=np.concatenate([a.rotations, b.rotations]),
        scale_logs=np.concatenate([a.scale_logs, b.scale_logs]),
        opacity_logits=np.concatenate([a.opacity_logits, b.opacity_logits]),
        sh_coeffs=np.concatenate([a.sh_coeffs, b.sh_coeffs]),
    )


def random_set(rng: np.random.Generator, n: int, sh_degree: int = 3,
               center=(0.0, 0.0, 0.0), spread: float = 1.0,
               scale_range=(0.01, 0.1), opacity_range=(0.05, 0.95)) -> GaussianSet:
    """Seeded random splat cloud used by tests and benchmarks."""
    from .quaternion import random_unit_quats

    k = shmod.num_coeffs(sh_degree)
    means = np.asarray(center, dtype=np.float64) + rng.normal(scale=spread, size=(n, 3))
    sh = np.zeros((n, k, 3))
    sh[:, 0, :] = shmod.rgb_to_dc(rng.uniform(0.1, 0.9, size=(n, 3)))
    if k > 1:
        sh[:, 1:, :] = rng.normal(scale=0.05, size=(n, k - 1, 3))
    return GaussianSet.from_activated(
        means=means,
        rotations=random_unit_quats(rng, n),
        scales=rng.uniform(*scale_range, size=(n, 3)),
        opacities=rng.uniform(*opacity_range, size=n),
        sh_coeffs=sh,
    )
