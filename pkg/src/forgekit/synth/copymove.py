"""Copy-move forgery: duplicate the largest object elsewhere in its image."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GenerationSkip, UsageError
from .affine import AffineParams, apply_affine
from .blend import BlendParams, alpha_blend
from .raster import ObjectMask, RasterImage

GENERATOR_VERSION = "cm-1"


@dataclass
class ForgeryProvenance:
    """Everything needed to regenerate a forged image bit-exactly."""

    source_image_id: str
    category: str
    affine: AffineParams
    blend: BlendParams
    generator_version: str = GENERATOR_VERSION
    seed: int = 0
    kind: str = "copy_move"
    inpaint_iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "source_image_id": self.source_image_id,
            "category": self.category,
            "affine": self.affine.to_dict(),
            "blend": self.blend.to_dict(),
            "generator_version": self.generator_version,
            "seed": self.seed,
            "kind": self.kind,
            "inpaint_iterations": self.inpaint_iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForgeryProvenance":
        return cls(
            source_image_id=d["source_image_id"],
            category=d["category"],
            affine=AffineParams.from_dict(d["affine"]),
            blend=BlendParams.from_dict(d["blend"]),
            generator_version=d.get("generator_version", GENERATOR_VERSION),
            seed=d.get("seed", 0),
            kind=d.get("kind", "copy_move"),
            inpaint_iterations=d.get("inpaint_iterations", 0),
        )


def select_largest_mask(masks: list[ObjectMask], category: str) -> ObjectMask:
    """Largest-area mask of a category; ties break to the lowest index."""
    best = None
    best_area = -1
    for m in masks:
        if m.category != category:
            continue
        if m.area > best_area:
            best, best_area = m, m.area
    if best is None:
        raise GenerationSkip(f"no mask of category {category!r}")
    return best


def mask_bbox(mask: ObjectMask) -> tuple[int, int, int, int]:
    """Tight (x0, y0, x1, y1) bounds of the set pixels, exclusive on the right."""
    rows = np.flatnonzero(mask.bits.any(axis=1))
    cols = np.flatnonzero(mask.bits.any(axis=0))
    if rows.size == 0:
        raise GenerationSkip("empty mask has no bounding box")
    return int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1


def render_copy_move(image: RasterImage, masks: list[ObjectMask],
                     provenance: ForgeryProvenance) -> RasterImage:
    """Deterministically replay a copy-move forgery from its provenance."""
    mask = select_largest_mask(masks, provenance.category)
    x0, y0, x1, y1 = mask_bbox(mask)
    region = RasterImage(image.data[y0:y1, x0:x1].copy(), image.color_space)
    region_mask = ObjectMask(mask.bits[y0:y1, x0:x1], mask.category)

    moved, moved_mask = apply_affine(region, region_mask, provenance.affine)

    h, w = image.data.shape[:2]
    px, py = provenance.affine.translate_x, provenance.affine.translate_y
    fg = image.data.copy()
    full_mask = np.zeros((h, w), dtype=bool)
    sx0, sy0 = max(0, -px), max(0, -py)
    dx0, dy0 = max(0, px), max(0, py)
    cw = min(moved.width - sx0, w - dx0)
    ch = min(moved.height - sy0, h - dy0)
    if cw <= 0 or ch <= 0:
        raise GenerationSkip("pasted region falls entirely outside the frame")
    fg[dy0:dy0 + ch, dx0:dx0 + cw] = moved.data[sy0:sy0 + ch, sx0:sx0 + cw]
    full_mask[dy0:dy0 + ch, dx0:dx0 + cw] = moved_mask.bits[sy0:sy0 + ch, sx0:sx0 + cw]
    if not full_mask.any():
        raise GenerationSkip("pasted mask falls entirely outside the frame")

    fg_img = RasterImage(fg, image.color_space)
    return alpha_blend(fg_img, image, ObjectMask(full_mask, mask.category),
                       provenance.blend)


def paste_footprint(image: RasterImage, masks: list[ObjectMask],
                    provenance: ForgeryProvenance) -> np.ndarray:
    """Full-frame boolean footprint of the pasted object (before feathering)."""
    mask = select_largest_mask(masks, provenance.category)
    x0, y0, x1, y1 = mask_bbox(mask)
    region = RasterImage(image.data[y0:y1, x0:x1].copy(), image.color_space)
    region_mask = ObjectMask(mask.bits[y0:y1, x0:x1], mask.category)
    _, moved_mask = apply_affine(region, region_mask, provenance.affine)

    h, w = image.data.shape[:2]
    px, py = provenance.affine.translate_x, provenance.affine.translate_y
    footprint = np.zeros((h, w), dtype=bool)
    sx0, sy0 = max(0, -px), max(0, -py)
    dx0, dy0 = max(0, px), max(0, py)
    cw = min(moved_mask.width - sx0, w - dx0)
    ch = min(moved_mask.height - sy0, h - dy0)
    if cw > 0 and ch > 0:
        footprint[dy0:dy0 + ch, dx0:dx0 + cw] = moved_mask.bits[sy0:sy0 + ch, sx0:sx0 + cw]
    return footprint


@dataclass
class CopyMoveSampling:
    """Parameter ranges for randomized forgery synthesis.

    ``max_source_overlap`` keeps the duplicate from landing on the object
    it was copied from, so the paste stays visible.
    """

    rotation_limit: float = 30.0
    scale_range: tuple[float, float] = (0.7, 1.3)
    translate_fraction: float = 0.4
    alpha_range: tuple[float, float] = (0.85, 1.0)
    feather_radius: int = 2
    min_in_frame: float = 0.8
    max_source_overlap: float = 0.3
    retry_budget: int = 5


def make_copy_move_pair(image: RasterImage, masks: list[ObjectMask],
                        category: str, rng_seed: int,
                        sampling: CopyMoveSampling | None = None,
                        image_id: str = "",
                        ) -> tuple[RasterImage, RasterImage, ForgeryProvenance]:
    """Produce (authentic, forged, provenance) for one corpus image.

    Samples affine/blend parameters and a paste location from the seed,
    retrying up to the budget when the paste leaves the frame, keeps less
    than the required fraction of the object visible, or changes nothing.
    """
    sampling = sampling or CopyMoveSampling()
    rng = np.random.default_rng(rng_seed)
    mask = select_largest_mask(masks, category)
    x0, y0, x1, y1 = mask_bbox(mask)
    h, w = image.data.shape[:2]

    last_reason = "no attempt made"
    for _ in range(sampling.retry_budget):
        affine = AffineParams(
            rotation=float(rng.uniform(-sampling.rotation_limit, sampling.rotation_limit)),
            scale=float(rng.uniform(*sampling.scale_range)),
            flip_horizontal=bool(rng.integers(0, 2)),
        )
        blend = BlendParams(
            alpha=float(rng.uniform(*sampling.alpha_range)),
            feather_radius=sampling.feather_radius,
        )
        dx = int(rng.integers(-int(sampling.translate_fraction * w),
                              int(sampling.translate_fraction * w) + 1))
        dy = int(rng.integers(-int(sampling.translate_fraction * h),
                              int(sampling.translate_fraction * h) + 1))
        try:
            region = RasterImage(image.data[y0:y1, x0:x1].copy(), image.color_space)
            region_mask = ObjectMask(mask.bits[y0:y1, x0:x1], mask.category)
            moved, moved_mask = apply_affine(region, region_mask, affine)
            # paste so the transformed region's center lands on the source
            # bbox center shifted by (dx, dy)
            cx = (x0 + x1) / 2 + dx
            cy = (y0 + y1) / 2 + dy
            affine.translate_x = int(round(cx - moved.width / 2))
            affine.translate_y = int(round(cy - moved.height / 2))

            visible = _in_frame_fraction(moved_mask, affine.translate_x,
                                         affine.translate_y, w, h)
            if visible < sampling.min_in_frame:
                last_reason = f"only {visible:.0%} of the object stays in frame"
                continue
            overlap = _source_overlap_fraction(moved_mask, affine.translate_x,
                                               affine.translate_y, mask.bits)
            if overlap > sampling.max_source_overlap:
                last_reason = f"paste covers {overlap:.0%} of the source object"
                continue

            provenance = ForgeryProvenance(
                source_image_id=image_id, category=category,
                affine=affine, blend=blend, seed=rng_seed)
            forged = render_copy_move(image, masks, provenance)
        except GenerationSkip as skip:
            last_reason = str(skip)
            continue

        if np.array_equal(forged.data, image.data):
            if blend.alpha == 0.0:
                raise GenerationSkip("degenerate blend: alpha 0 leaves the image unchanged")
            last_reason = "forged image equals the authentic image"
            continue
        return image.copy(), forged, provenance

    raise GenerationSkip(f"retry budget exhausted: {last_reason}")


def _in_frame_fraction(mask: ObjectMask, px: int, py: int, w: int, h: int) -> float:
    sx0, sy0 = max(0, -px), max(0, -py)
    cw = min(mask.width - sx0, w - max(0, px))
    ch = min(mask.height - sy0, h - max(0, py))
    if cw <= 0 or ch <= 0:
        return 0.0
    inside = int(mask.bits[sy0:sy0 + ch, sx0:sx0 + cw].sum())
    return inside / max(1, mask.area)


def _source_overlap_fraction(moved_mask: ObjectMask, px: int, py: int,
                             source_bits: np.ndarray) -> float:
    h, w = source_bits.shape
    sx0, sy0 = max(0, -px), max(0, -py)
    dx0, dy0 = max(0, px), max(0, py)
    cw = min(moved_mask.width - sx0, w - dx0)
    ch = min(moved_mask.height - sy0, h - dy0)
    if cw <= 0 or ch <= 0:
        return 0.0
    pasted = moved_mask.bits[sy0:sy0 + ch, sx0:sx0 + cw]
    covered = int((pasted & source_bits[dy0:dy0 + ch, dx0:dx0 + cw]).sum())
    return covered / max(1, int(pasted.sum()))
