"""Color harmonization across the head-body seam.

Lighting differs between the two captures, so the head's base color band is
remapped by a per-channel affine (gain, bias) chosen in closed form to match
the mean and standard deviation of degree-0 SH coefficients inside a
boundary band: gain = sd_body / sd_head and bias = mu_body - gain * mu_head,
the exact solution of the linear system {gain*mu_h + bias = mu_b,
gain*sd_h = sd_b}. The band is mutual proximity: splats of one set within
`band_width` of the nearest splat of the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..core.gaussians import GaussianSet
from ..errors import InvalidInputError

_SD_FLOOR = 1e-12   # constant-color band: keep gain 1, shift by the means


@dataclass(frozen=True)
class HarmonizeResult:
    gain: np.ndarray         # (3,) per channel
    bias: np.ndarray         # (3,)
    head: GaussianSet        # head with remapped degree-0 SH
    head_band: np.ndarray    # indices into head
    body_band: np.ndarray    # indices into body


def band_indices(head: GaussianSet, body: GaussianSet,
                 band_width: float) -> tuple[np.ndarray, np.ndarray]:
    if head.count == 0 or body.count == 0:
        raise InvalidInputError("both sets must be nonempty")
    d_head = cKDTree(body.means).query(head.means)[0]
    d_body = cKDTree(head.means).query(body.means)[0]
    return (np.nonzero(d_head <= band_width)[0],
            np.nonzero(d_body <= band_width)[0])


def harmonize_colors(head: GaussianSet, body: GaussianSet,
                     band_width: float) -> HarmonizeResult:
    if not np.isfinite(band_width) or band_width <= 0:
        raise InvalidInputError("band width must be positive")
    head_band, body_band = band_indices(head, body, band_width)
    if len(head_band) == 0 or len(body_band) == 0:
        raise InvalidInputError(
            f"no splats within the {band_width} boundary band on both sides")

    h_dc = head.sh_coeffs[head_band, 0, :]
    b_dc = body.sh_coeffs[body_band, 0, :]
    mu_h, mu_b = h_dc.mean(axis=0), b_dc.mean(axis=0)
    sd_h, sd_b = h_dc.std(axis=0), b_dc.std(axis=0)
    gain = np.where(sd_h > _SD_FLOOR, sd_b / np.maximum(sd_h, _SD_FLOOR), 1.0)
    bias = mu_b - gain * mu_h

    out = head.copy()
    out.sh_coeffs[:, 0, :] = gain * out.sh_coeffs[:, 0, :] + bias
    return HarmonizeResult(gain=gain, bias=bias, head=out,
                           head_band=head_band, body_band=body_band)
