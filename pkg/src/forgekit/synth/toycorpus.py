"""Procedural toy corpus: textured backgrounds with simple labeled objects.

Materializes a small deterministic image set with COCO-style polygon
annotations so the full pipeline runs without external downloads.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

TOY_CORPUS_SEED = 1517
CATEGORIES = ("blob", "box", "wedge")


def _background(rng: np.random.Generator, size: int) -> np.ndarray:
    """Smooth color gradient plus band-limited noise, uint8 (size, size, 3)."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    base = np.stack([
        90 + 70 * xx + 25 * np.sin(2 * math.pi * (yy * rng.uniform(1, 3))),
        90 + 70 * yy + 25 * np.sin(2 * math.pi * (xx * rng.uniform(1, 3))),
        110 + 50 * (xx + yy) / 2,
    ], axis=-1)
    coarse = rng.uniform(-28, 28, size=(size // 8, size // 8, 3))
    noise = np.kron(coarse, np.ones((8, 8, 1)))
    fine = rng.uniform(-16, 16, size=(size, size, 3))
    return np.clip(base + noise[:size, :size] + fine, 0, 255).astype(np.uint8)


def _shape_polygon(rng: np.random.Generator, size: int,
                   category: str) -> list[tuple[float, float]]:
    margin = size // 5
    cx = float(rng.uniform(margin, size - margin))
    cy = float(rng.uniform(margin, size - margin))
    r = float(rng.uniform(size * 0.12, size * 0.2))
    if category == "blob":
        angles = np.linspace(0.0, 2 * math.pi, 24, endpoint=False)
        rx, ry = r, r * float(rng.uniform(0.6, 1.0))
        return [(cx + rx * math.cos(a), cy + ry * math.sin(a)) for a in angles]
    if category == "box":
        w, h = r, r * float(rng.uniform(0.5, 1.2))
        return [(cx - w, cy - h), (cx + w, cy - h), (cx + w, cy + h), (cx - w, cy + h)]
    # wedge: triangle with a random orientation
    a0 = float(rng.uniform(0, 2 * math.pi))
    return [(cx + 1.4 * r * math.cos(a0 + k * 2 * math.pi / 3),
             cy + 1.4 * r * math.sin(a0 + k * 2 * math.pi / 3)) for k in range(3)]


def build_toy_corpus(out_dir: str | Path, n_images: int = 50, size: int = 128,
                     seed: int = TOY_CORPUS_SEED) -> Path:
    """Write PNG images plus annotations.json; returns the annotation path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = []
    annotations = []
    ann_id = 0
    for idx in range(n_images):
        rng = np.random.default_rng([seed, idx])
        canvas = _background(rng, size)
        img = Image.fromarray(canvas)
        draw = ImageDraw.Draw(img)
        occupied = np.zeros((size, size), dtype=bool)
        n_shapes = int(rng.integers(2, 5))
        for _ in range(n_shapes):
            category = CATEGORIES[int(rng.integers(0, len(CATEGORIES)))]
            for _attempt in range(8):
                poly = _shape_polygon(rng, size, category)
                stencil = Image.new("1", (size, size), 0)
                ImageDraw.Draw(stencil).polygon(poly, fill=1, outline=1)
                bits = np.asarray(stencil, dtype=bool)
                if bits.sum() < 16 or (bits & occupied).any():
                    continue
                color = tuple(int(v) for v in rng.integers(30, 226, size=3))
                draw.polygon(poly, fill=color, outline=color)
                # fine interior grain so later resampling leaves a visible
                # low-pass trace on copied objects
                grain = rng.integers(-25, 26, size=(size, size, 3))
                arr = np.asarray(img, dtype=np.int64)
                arr[bits] = np.clip(arr[bits] + grain[bits], 0, 255)
                img = Image.fromarray(arr.astype(np.uint8))
                draw = ImageDraw.Draw(img)
                occupied |= bits
                ann_id += 1
                flat = [round(float(v), 2) for xy in poly for v in xy]
                annotations.append({
                    "id": ann_id,
                    "image_id": f"toy-{idx:03d}",
                    "category_id": CATEGORIES.index(category) + 1,
                    "segmentation": [flat],
                    "area": int(bits.sum()),
                    "iscrowd": 0,
                })
                break
        file_name = f"toy-{idx:03d}.png"
        img.save(out / file_name, format="PNG")
        images.append({"id": f"toy-{idx:03d}", "file_name": file_name,
                       "width": size, "height": size})

    doc = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": i + 1, "name": name}
                       for i, name in enumerate(CATEGORIES)],
    }
    ann_path = out / "annotations.json"
    ann_path.write_text(json.dumps(doc, indent=1, sort_keys=True))
    return ann_path
