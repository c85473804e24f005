"""Image metrics: PSNR, masked PSNR, SSIM (with analytic gradient), L1.

SSIM uses the standard 11x11 Gaussian window (sigma 1.5), constants
K1=0.01 / K2=0.03 on unit dynamic range, evaluated on the valid interior.
PSNR of identical images is reported as the capped sentinel 99.0 (the cap is
applied to every value so the scale is monotone).
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from ..errors import InvalidInputError

PSNR_CAP = 99.0
_C1 = 0.01 ** 2
_C2 = 0.03 ** 2


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (ax / sigma) ** 2)
    win = np.outer(g, g)
    return win / win.sum()

_WINDOW = _gaussian_window()


def _check_pair(img: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    img = np.asarray(img, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if img.shape != ref.shape:
        raise InvalidInputError(f"image shapes differ: {img.shape} vs {ref.shape}")
    return img, ref


def l1(img: np.ndarray, ref: np.ndarray) -> float:
    img, ref = _check_pair(img, ref)
    return float(np.abs(img - ref).mean())


def psnr(img: np.ndarray, ref: np.ndarray) -> float:
    img, ref = _check_pair(img, ref)
    mse = float(((img - ref) ** 2).mean())
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, float(10.0 * np.log10(1.0 / mse)))


def psnr_masked(img: np.ndarray, ref: np.ndarray, mask: np.ndarray | None) -> float:
    img, ref = _check_pair(img, ref)
    if mask is None:
        return psnr(img, ref)
    mask = np.asarray(mask)
    if mask.shape != img.shape[:2]:
        raise InvalidInputError("mask dimensions do not match the images")
    if not np.isin(mask, (0, 1)).all():
        raise InvalidInputError("mask must be binary")
    sel = mask.astype(bool)
    if not sel.any():
        raise InvalidInputError("mask selects no pixels")
    mse = float(((img[sel] - ref[sel]) ** 2).mean())
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, float(10.0 * np.log10(1.0 / mse)))


def _channels(img: np.ndarray):
    if img.ndim == 2:
        return [img]
    return [img[:, :, c] for c in range(img.shape[2])]


def _ssim_terms(x: np.ndarray, y: np.ndarray):
    win = _WINDOW
    wx = convolve2d(x, win, mode="valid")
    wy = convolve2d(y, win, mode="valid")
    wxx = convolve2d(x * x, win, mode="valid")
    wyy = convolve2d(y * y, win, mode="valid")
    wxy = convolve2d(x * y, win, mode="valid")
    a1 = 2.0 * wx * wy + _C1
    a2 = 2.0 * (wxy - wx * wy) + _C2
    b1 = wx * wx + wy * wy + _C1
    b2 = (wxx - wx * wx) + (wyy - wy * wy) + _C2
    smap = (a1 * a2) / (b1 * b2)
    return smap, (wx, wy, wxx, wyy, wxy, a1, a2, b1, b2)


def ssim(img: np.ndarray, ref: np.ndarray) -> float:
    img, ref = _check_pair(img, ref)
    if img.shape[0] < 11 or img.shape[1] < 11:
        raise InvalidInputError("images smaller than the 11x11 SSIM window")
    vals = [float(_ssim_terms(x, y)[0].mean())
            for x, y in zip(_channels(img), _channels(ref))]
    return float(np.mean(vals))


def ssim_with_grad(img: np.ndarray, ref: np.ndarray) -> tuple[float, np.ndarray]:
    """(ssim value, d ssim / d img) via the closed-form adjoint.

    The windowed moments are linear images of x, x^2 and x*y, so the adjoint
    is a full correlation of the per-term maps with the (symmetric) window.
    """
    img, ref = _check_pair(img, ref)
    if img.shape[0] < 11 or img.shape[1] < 11:
        raise InvalidInputError("images smaller than the 11x11 SSIM window")
    if np.array_equal(img, ref):
        # the gradient at img == ref is exactly zero (the two terms of the
        # adjoint cancel); skip the evaluation so optimizers see a true
        # stationary point instead of cancellation residue
        return 1.0, np.zeros_like(img)
    win = _WINDOW
    grads = []
    vals = []
    channels_x = _channels(img)
    channels_y = _channels(ref)
    n_ch = len(channels_x)
    for x, y in zip(channels_x, channels_y):
        smap, (wx, wy, wxx, wyy, wxy, a1, a2, b1, b2) = _ssim_terms(x, y)
        vals.append(float(smap.mean()))
        scale = 1.0 / (smap.size * n_ch)
        d_wx = scale * ((2.0 * wy * a2 - 2.0 * wy * a1) / (b1 * b2)
                        - smap * (2.0 * wx / b1 - 2.0 * wx / b2))
        d_wxx = scale * (-smap / b2)
        d_wxy = scale * (2.0 * a1 / (b1 * b2))
        dx = convolve2d(d_wx, win, mode="full")
        dx += 2.0 * x * convolve2d(d_wxx, win, mode="full")
        dx += y * convolve2d(d_wxy, win, mode="full")
        grads.append(dx)
    grad = np.stack(grads, axis=2) if img.ndim == 3 else grads[0]
    return float(np.mean(vals)), grad


def metrics(img: np.ndarray, ref: np.ndarray, mask: np.ndarray | None = None) -> dict:
    """The full metric set: {psnr, psnr_masked, ssim, l1}."""
    return {
        "psnr": psnr(img, ref),
        "psnr_masked": psnr_masked(img, ref, mask),
        "ssim": ssim(img, ref),
        "l1": l1(img, ref),
    }
