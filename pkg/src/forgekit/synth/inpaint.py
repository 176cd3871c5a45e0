"""Diffusion fill: replace masked pixels by iterated neighborhood averaging.

A stand-in for learned semantic inpainting: the hole is filled with the
harmonic interpolant of its boundary, which converges to the original
values whenever the surroundings vary linearly.
"""
from __future__ import annotations

import numpy as np

from ..errors import UsageError
from .raster import ObjectMask, RasterImage


def simple_inpaint(image: RasterImage, mask: ObjectMask,
                   iterations: int = 500) -> RasterImage:
    """Fill the masked region by Jacobi iteration of the 4-neighbor mean."""
    if mask.bits.shape != image.data.shape[:2]:
        raise UsageError("mask dimensions do not match the image")
    if iterations < 0:
        raise UsageError("iterations must be >= 0")
    area = mask.area
    if area == 0:
        return image.copy()
    if area * 2 >= mask.bits.size:
        raise UsageError("mask covers half the image or more; nothing to diffuse from")

    hole = mask.bits
    u = image.data.astype(np.float64)
    u[hole] = image.data[~hole].mean(axis=0)
    for _ in range(iterations):
        padded = np.pad(u, ((1, 1), (1, 1), (0, 0)), mode="edge")
        neighbors = (padded[:-2, 1:-1] + padded[2:, 1:-1]
                     + padded[1:-1, :-2] + padded[1:-1, 2:]) / 4.0
        u[hole] = neighbors[hole]

    out = image.data.copy()
    out[hole] = np.clip(np.rint(u[hole]), 0, 255).astype(np.uint8)
    return RasterImage(out, image.color_space)
