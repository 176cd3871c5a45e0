"""Forgery synthesis: copy-move pairs, diffusion inpainting, dataset output."""
from .affine import AffineParams, apply_affine
from .blend import BlendParams, alpha_blend
from .coco import CorpusItem, decode_rle, load_corpus, rasterize_polygon
from .copymove import (CopyMoveSampling, ForgeryProvenance, make_copy_move_pair,
                       mask_bbox, render_copy_move, select_largest_mask)
from .generate import GenerateConfig, generate_dataset, pair_plan, record_seed
from .inpaint import simple_inpaint
from .raster import (ObjectMask, RasterImage, dilate_mask, feather_mask,
                     load_image, save_image)
from .toycorpus import TOY_CORPUS_SEED, build_toy_corpus

__all__ = [
    "AffineParams", "BlendParams", "CopyMoveSampling", "CorpusItem",
    "ForgeryProvenance", "GenerateConfig", "ObjectMask", "RasterImage",
    "TOY_CORPUS_SEED", "alpha_blend", "apply_affine", "build_toy_corpus",
    "decode_rle", "dilate_mask", "feather_mask", "generate_dataset",
    "load_corpus", "load_image", "make_copy_move_pair", "mask_bbox",
    "pair_plan", "rasterize_polygon", "record_seed", "render_copy_move",
    "save_image", "select_largest_mask", "simple_inpaint",
]
