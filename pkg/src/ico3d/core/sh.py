"""Real spherical harmonics for view-dependent splat color.

Basis ordering and signs follow the de-facto splat asset convention so
coefficients from community exporters evaluate identically here. Color is
reconstructed as clamp(0.5 + sum(basis * coeff), 0, 1).
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError

C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)

MAX_DEGREE = 3


def num_coeffs(degree: int) -> int:
    """Coefficients per channel for a given SH degree: (degree + 1)^2."""
    if not 0 <= degree <= MAX_DEGREE:
        raise InvalidInputError(f"SH degree must be in 0..{MAX_DEGREE}, got {degree}")
    return (degree + 1) ** 2


def sh_basis(view_dir: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate the SH basis at unit directions. (..., 3) -> (..., (deg+1)^2)."""
    k = num_coeffs(degree)
    d = np.asarray(view_dir, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    basis = np.empty(d.shape[:-1] + (k,), dtype=np.float64)
    basis[..., 0] = C0
    if degree >= 1:
        basis[..., 1] = -C1 * y
        basis[..., 2] = C1 * z
        basis[..., 3] = -C1 * x
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        basis[..., 4] = C2[0] * xy
        basis[..., 5] = C2[1] * yz
        basis[..., 6] = C2[2] * (2.0 * zz - xx - yy)
        basis[..., 7] = C2[3] * xz
        basis[..., 8] = C2[4] * (xx - yy)
    if degree >= 3:
        basis[..., 9] = C3[0] * y * (3 * xx - yy)
        basis[..., 10] = C3[1] * xy * z
        basis[..., 11] = C3[2] * y * (4 * zz - xx - yy)
        basis[..., 12] = C3[3] * z * (2 * zz - 3 * xx - 3 * yy)
        basis[..., 13] = C3[4] * x * (4 * zz - xx - yy)
        basis[..., 14] = C3[5] * z * (xx - yy)
        basis[..., 15] = C3[6] * x * (xx - 4 * yy)
    return basis


def eval_sh(coeffs: np.ndarray, view_dir: np.ndarray, degree: int) -> np.ndarray:
    """RGB color in [0,1] from SH coefficients and unit view directions.

    coeffs: (..., K, 3) with K = (degree+1)^2; view_dir: (..., 3).
    Degree 0 is view-independent by construction.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    k = num_coeffs(degree)
    if coeffs.shape[-2] != k:
        raise InvalidInputError(
            f"expected {k} SH coefficients per channel for degree {degree}, "
            f"got {coeffs.shape[-2]}")
    basis = sh_basis(view_dir, degree)
    raw = np.einsum("...k,...kc->...c", basis, coeffs)
    return np.clip(raw + 0.5, 0.0, 1.0)


def rgb_to_dc(rgb: np.ndarray) -> np.ndarray:
    """Degree-0 coefficient producing a given base color (inverse of eval_sh)."""
    return (np.asarray(rgb, dtype=np.float64) - 0.5) / C0


def dc_to_rgb(dc: np.ndarray) -> np.ndarray:
    """Base color of degree-0 coefficients, clamped to [0,1]."""
    return np.clip(np.asarray(dc, dtype=np.float64) * C0 + 0.5, 0.0, 1.0)
