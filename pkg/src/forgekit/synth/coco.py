"""COCO-style annotation ingestion: polygons or RLE to binary masks.

Only segmentation geometry and category names are consumed; all other
annotation fields are ignored.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from ..errors import DataError
from .raster import ObjectMask


@dataclass
class CorpusItem:
    image_id: str
    path: Path
    width: int
    height: int
    masks: list[ObjectMask]


def rasterize_polygon(points: list[float], width: int, height: int) -> np.ndarray:
    """Fill a flat [x1, y1, x2, y2, ...] polygon into a boolean grid."""
    if len(points) < 6 or len(points) % 2 != 0:
        raise DataError(f"polygon needs >= 3 (x, y) pairs, got {len(points)} values")
    canvas = Image.new("1", (width, height), 0)
    xy = list(zip(points[0::2], points[1::2]))
    ImageDraw.Draw(canvas).polygon(xy, fill=1, outline=1)
    return np.asarray(canvas, dtype=bool)


def decode_rle(counts, size: list[int]) -> np.ndarray:
    """Decode COCO RLE (uncompressed list or compressed string), column-major."""
    h, w = int(size[0]), int(size[1])
    if isinstance(counts, str):
        counts = _decode_compressed_counts(counts)
    counts = [int(c) for c in counts]
    if sum(counts) != h * w:
        raise DataError(f"RLE counts sum {sum(counts)} != {h}*{w}")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    return flat.reshape((w, h)).T  # column-major storage


def _decode_compressed_counts(encoded: str) -> list[int]:
    """COCO's LEB128-style compressed counts with delta coding."""
    counts: list[int] = []
    data = encoded.encode("ascii")
    pos = 0
    while pos < len(data):
        value = 0
        shift = 0
        more = True
        while more:
            if pos >= len(data):
                raise DataError("truncated compressed RLE")
            c = data[pos] - 48
            value |= (c & 0x1F) << shift
            more = bool(c & 0x20)
            pos += 1
            shift += 5
            if not more and (c & 0x10):
                value |= -1 << shift
        if len(counts) > 2:
            value += counts[-2]
        counts.append(value)
    return counts


def load_corpus(annotation_path: str | Path,
                image_dir: str | Path | None = None) -> list[CorpusItem]:
    """Read a COCO-style annotation file into per-image mask lists.

    Image paths resolve relative to ``image_dir`` (default: the annotation
    file's directory). Items are returned sorted by image id.
    """
    annotation_path = Path(annotation_path)
    base = Path(image_dir) if image_dir is not None else annotation_path.parent
    try:
        doc = json.loads(annotation_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read annotations {annotation_path}: {exc}") from exc

    for key in ("images", "annotations", "categories"):
        if key not in doc:
            raise DataError(f"annotation file lacks {key!r} section")
    categories = {c["id"]: c["name"] for c in doc["categories"]}
    images = {}
    for entry in doc["images"]:
        images[entry["id"]] = CorpusItem(
            image_id=str(entry["id"]), path=base / entry["file_name"],
            width=int(entry["width"]), height=int(entry["height"]), masks=[])

    for ann in doc["annotations"]:
        item = images.get(ann["image_id"])
        if item is None:
            raise DataError(f"annotation references unknown image {ann['image_id']}")
        category = categories.get(ann["category_id"])
        if category is None:
            raise DataError(f"annotation references unknown category {ann['category_id']}")
        seg = ann["segmentation"]
        if isinstance(seg, dict):
            bits = decode_rle(seg["counts"], seg["size"])
        else:
            bits = np.zeros((item.height, item.width), dtype=bool)
            for poly in seg:
                bits |= rasterize_polygon(poly, item.width, item.height)
        if bits.shape != (item.height, item.width):
            raise DataError(f"mask shape {bits.shape} does not match image "
                            f"{item.image_id} ({item.height}, {item.width})")
        item.masks.append(ObjectMask(bits, category))

    return sorted(images.values(), key=lambda it: it.image_id)
