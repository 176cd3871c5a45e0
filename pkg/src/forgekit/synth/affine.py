"""Affine resampling of an image region and its mask."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import GenerationSkip, UsageError
from .raster import ObjectMask, RasterImage


@dataclass
class AffineParams:
    """Rotation/scale/flip applied to a copied region, plus its paste offset.

    ``translate_x``/``translate_y`` give the top-left corner, in host-frame
    pixels, where the transformed region is pasted; they are not used by
    :func:`apply_affine` itself, which only reshapes the region.
    """

    rotation: float = 0.0
    scale: float = 1.0
    translate_x: int = 0
    translate_y: int = 0
    flip_horizontal: bool = False

    def __post_init__(self):
        if self.scale <= 0:
            raise UsageError("affine scale must be positive")

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation,
            "scale": self.scale,
            "translate_x": self.translate_x,
            "translate_y": self.translate_y,
            "flip_horizontal": self.flip_horizontal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AffineParams":
        return cls(rotation=d["rotation"], scale=d["scale"],
                   translate_x=d["translate_x"], translate_y=d["translate_y"],
                   flip_horizontal=d["flip_horizontal"])


def _linear_map(params: AffineParams) -> np.ndarray:
    theta = math.radians(params.rotation)
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    sx = -params.scale if params.flip_horizontal else params.scale
    return rot @ np.array([[sx, 0.0], [0.0, params.scale]])


def _bilinear_gather(channel: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``channel`` at float coords, zero outside the source extent."""
    h, w = channel.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    out = np.zeros(xs.shape, dtype=np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            weight = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            vals = np.where(valid, channel[yi.clip(0, h - 1), xi.clip(0, w - 1)], 0.0)
            out += weight * vals
    return out


def apply_affine(region: RasterImage, mask: ObjectMask,
                 params: AffineParams) -> tuple[RasterImage, ObjectMask]:
    """Resample a region and its mask under rotation/scale/flip.

    Pixels are bilinearly interpolated; the mask is nearest-neighbor
    resampled and re-binarized. The output canvas is the bounding box of
    the transformed region, so identity parameters reproduce the input
    exactly. Raises :class:`GenerationSkip` if the transformed mask is empty.
    """
    if region.data.shape[:2] != mask.bits.shape:
        raise UsageError("region and mask dimensions differ")
    h, w = mask.bits.shape
    fwd = _linear_map(params)
    corners = np.array([[-w / 2, -h / 2], [w / 2, -h / 2],
                        [-w / 2, h / 2], [w / 2, h / 2]]).T
    mapped = fwd @ corners
    out_w = max(1, math.ceil(mapped[0].max() - mapped[0].min() - 1e-9))
    out_h = max(1, math.ceil(mapped[1].max() - mapped[1].min() - 1e-9))

    inv = np.linalg.inv(fwd)
    dst_x, dst_y = np.meshgrid(np.arange(out_w, dtype=np.float64),
                               np.arange(out_h, dtype=np.float64))
    rel = np.stack([dst_x.ravel() - (out_w - 1) / 2,
                    dst_y.ravel() - (out_h - 1) / 2])
    src = inv @ rel
    src_x = (src[0] + (w - 1) / 2).reshape(out_h, out_w)
    src_y = (src[1] + (h - 1) / 2).reshape(out_h, out_w)

    out = np.empty((out_h, out_w, 3), dtype=np.uint8)
    for ch in range(3):
        vals = _bilinear_gather(region.data[:, :, ch].astype(np.float64), src_x, src_y)
        out[:, :, ch] = np.clip(np.rint(vals), 0, 255).astype(np.uint8)

    nx = np.rint(src_x).astype(np.int64)
    ny = np.rint(src_y).astype(np.int64)
    inside = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h)
    sampled = np.zeros((out_h, out_w), dtype=bool)
    sampled[inside] = mask.bits[ny[inside], nx[inside]]

    if not sampled.any():
        raise GenerationSkip("affine transform produced an empty mask")
    return RasterImage(out, region.color_space), ObjectMask(sampled, mask.category)
