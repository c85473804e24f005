"""Image file I/O: 8-bit PNG (via Pillow) and float32 PFM."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from ..errors import InvalidInputError


def to_uint8(img: np.ndarray) -> np.ndarray:
    """[0,1] float image -> uint8 with round-half-up quantization."""
    img = np.asarray(img, dtype=np.float64)
    return np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_png(path: str | os.PathLike, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim not in (2, 3):
        raise InvalidInputError(f"expected HxW or HxWxC image, got shape {img.shape}")
    if img.dtype != np.uint8:
        img = to_uint8(img)
    Image.fromarray(img).save(path, format="PNG")


def read_png(path: str | os.PathLike) -> np.ndarray:
    """PNG -> float image in [0,1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB") if im.mode not in ("L", "RGB") else im)
    return arr.astype(np.float64) / 255.0


def write_pfm(path: str | os.PathLike, img: np.ndarray) -> None:
    """Float image -> PFM (little-endian, bottom-up row order)."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim == 3 and img.shape[2] == 3:
        header = b"PF\n"
    elif img.ndim == 2:
        header = b"Pf\n"
    else:
        raise InvalidInputError(f"PFM supports HxW or HxWx3 images, got {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.ascontiguousarray(img[::-1]).tobytes())


def read_pfm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind not in (b"PF", b"Pf"):
            raise InvalidInputError(f"not a PFM file: magic {kind!r}")
        w, h = (int(v) for v in fh.readline().split())
        scale = float(fh.readline())
        count = w * h * (3 if kind == b"PF" else 1)
        data = np.frombuffer(fh.read(count * 4), dtype="<f4" if scale < 0 else ">f4")
        if data.size != count:
            raise InvalidInputError("truncated PFM payload")
    shape = (h, w, 3) if kind == b"PF" else (h, w)
    return np.ascontiguousarray(data.reshape(shape)[::-1]).astype(np.float64)
