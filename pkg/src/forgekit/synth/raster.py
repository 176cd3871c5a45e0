"""Raster image and binary object-mask types plus PNG/JPEG IO."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataError, UsageError

COLOR_SPACES = ("RGB", "YCrCb")


@dataclass
class RasterImage:
    """Decoded 8-bit pixel grid, (H, W, 3) row-major, with a color-space tag."""

    data: np.ndarray
    color_space: str = "RGB"

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise UsageError(f"image data must be (H, W, 3), got {self.data.shape}")
        if self.data.dtype != np.uint8:
            raise UsageError(f"image data must be uint8, got {self.data.dtype}")
        if self.color_space not in COLOR_SPACES:
            raise UsageError(f"unknown color space {self.color_space!r}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    def copy(self) -> "RasterImage":
        return RasterImage(self.data.copy(), self.color_space)


@dataclass
class ObjectMask:
    """Binary per-pixel mask congruent with a host image."""

    bits: np.ndarray
    category: str = ""

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=bool)
        if self.bits.ndim != 2:
            raise UsageError(f"mask bits must be 2-D, got shape {self.bits.shape}")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def copy(self) -> "ObjectMask":
        return ObjectMask(self.bits.copy(), self.category)


def load_image(path: str | Path) -> RasterImage:
    """Decode a PNG/JPEG file to an RGB RasterImage."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return RasterImage(arr, "RGB")


def save_image(image: RasterImage, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image.data).save(path, format="PNG")


def _box_blur_1d(a: np.ndarray, radius: int, axis: int) -> np.ndarray:
    k = 2 * radius + 1
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(a, pad)
    c = np.cumsum(padded, axis=axis, dtype=np.float64)
    zero_shape = list(c.shape)
    zero_shape[axis] = 1
    c = np.concatenate([np.zeros(zero_shape), c], axis=axis)
    hi = [slice(None), slice(None)]
    lo = [slice(None), slice(None)]
    hi[axis] = slice(k, None)
    lo[axis] = slice(0, -k)
    return (c[tuple(hi)] - c[tuple(lo)]) / k


def feather_mask(mask: ObjectMask, radius: int) -> np.ndarray:
    """Soft [0, 1] weight field: box blur of the binary mask.

    Radius 0 returns the hard mask. The soft support extends at most
    ``radius`` pixels beyond the binary mask.
    """
    if radius < 0:
        raise UsageError("feather radius must be >= 0")
    hard = mask.bits.astype(np.float64)
    if radius == 0:
        return hard
    return _box_blur_1d(_box_blur_1d(hard, radius, 0), radius, 1)


def dilate_mask(bits: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a (2r+1) square element; bounds the feather band."""
    out = bits.astype(bool)
    if radius <= 0:
        return out.copy()
    h, w = out.shape
    padded = np.pad(out, radius)
    acc = np.zeros((h, w), dtype=bool)
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            acc |= padded[dy:dy + h, dx:dx + w]
    return acc
