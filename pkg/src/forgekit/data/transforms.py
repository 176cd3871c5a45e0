"""Color-space conversion and bilinear resizing for raster images."""
from __future__ import annotations

import numpy as np

from ..errors import UsageError
from ..synth.raster import RasterImage


def rgb_to_ycrcb(image: RasterImage) -> RasterImage:
    """BT.601 full-range RGB -> YCrCb, rounded and clamped to [0, 255]."""
    if image.color_space != "RGB":
        raise UsageError(f"expected RGB input, got {image.color_space}")
    rgb = image.data.astype(np.float64)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cr = (r - y) * 0.713 + 128.0
    cb = (b - y) * 0.564 + 128.0
    out = np.stack([y, cr, cb], axis=-1)
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8), "YCrCb")


def ycrcb_to_rgb(image: RasterImage) -> RasterImage:
    """Inverse of :func:`rgb_to_ycrcb`; round trips within +/-2 per channel."""
    if image.color_space != "YCrCb":
        raise UsageError(f"expected YCrCb input, got {image.color_space}")
    ycc = image.data.astype(np.float64)
    y, cr, cb = ycc[:, :, 0], ycc[:, :, 1], ycc[:, :, 2]
    r = y + (cr - 128.0) / 0.713
    b = y + (cb - 128.0) / 0.564
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    out = np.stack([r, g, b], axis=-1)
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8), "RGB")


def resize_bilinear(image: RasterImage, side: int) -> RasterImage:
    """Resample to side x side with the align-corners-off convention."""
    if side < 8:
        raise UsageError("target side must be >= 8")
    h, w = image.data.shape[:2]
    if h < 2 or w < 2:
        raise UsageError(f"degenerate input dimensions ({h}, {w})")
    if h == side and w == side:
        return image.copy()

    def axis_coords(n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = (np.arange(side, dtype=np.float64) + 0.5) * (n_in / side) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis_coords(h)
    x0, x1, fx = axis_coords(w)
    data = image.data.astype(np.float64)
    top = data[y0][:, x0] * (1 - fx)[None, :, None] + data[y0][:, x1] * fx[None, :, None]
    bottom = data[y1][:, x0] * (1 - fx)[None, :, None] + data[y1][:, x1] * fx[None, :, None]
    out = top * (1 - fy)[:, None, None] + bottom * fy[:, None, None]
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8),
                       image.color_space)
