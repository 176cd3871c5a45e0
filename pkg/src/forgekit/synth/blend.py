"""Alpha compositing of a foreground over a background through a mask."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from .raster import ObjectMask, RasterImage, feather_mask


@dataclass
class BlendParams:
    """Blending factor and soft-edge radius for compositing."""

    alpha: float = 1.0
    feather_radius: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise UsageError("alpha must lie in [0, 1]")
        if self.feather_radius < 0:
            raise UsageError("feather radius must be >= 0")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "feather_radius": self.feather_radius}

    @classmethod
    def from_dict(cls, d: dict) -> "BlendParams":
        return cls(alpha=d["alpha"], feather_radius=d["feather_radius"])


def alpha_blend(foreground: RasterImage, background: RasterImage,
                mask: ObjectMask, params: BlendParams) -> RasterImage:
    """Composite: alpha*F + (1-alpha)*B inside the (feathered) mask.

    Outside the feathered mask the background passes through untouched;
    the feather ramps the effective alpha down to zero across the band.
    """
    if foreground.data.shape != background.data.shape:
        raise UsageError("foreground and background dimensions differ")
    if mask.bits.shape != background.data.shape[:2]:
        raise UsageError("mask dimensions do not match the images")
    if foreground.color_space != background.color_space:
        raise UsageError("foreground and background color spaces differ")

    weight = feather_mask(mask, params.feather_radius) * params.alpha
    untouched = weight == 0.0
    w3 = weight[:, :, None]
    blended = w3 * foreground.data.astype(np.float64) \
        + (1.0 - w3) * background.data.astype(np.float64)
    out = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    out[untouched] = background.data[untouched]
    return RasterImage(out, background.color_space)
