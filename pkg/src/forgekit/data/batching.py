"""Image loading into normalized arrays and paired source/target batching."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import DataError, UsageError
from ..nn.tensor import Tensor
from ..synth.raster import load_image
from .manifest import ManifestRecord
from .transforms import resize_bilinear, rgb_to_ycrcb

SOURCE_DOMAIN = 0
TARGET_DOMAIN = 1


@dataclass
class Batch:
    """One training mini-batch; target batches never carry class labels."""

    images: Tensor  # (N, 3, S, S) float32 in [0, 1]
    domain_labels: np.ndarray
    class_labels: np.ndarray | None = None

    def __post_init__(self):
        if self.images.shape[0] == 0:
            raise UsageError("batch must be non-empty")

    @property
    def size(self) -> int:
        return self.images.shape[0]


@dataclass
class DatasetArrays:
    """A manifest materialized in memory; labels use -1 for unlabeled."""

    ids: list[str]
    images: np.ndarray  # (N, 3, S, S) float32
    labels: np.ndarray  # (N,) int64, -1 where the record is unlabeled

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def fully_labeled(self) -> bool:
        return bool(np.all(self.labels >= 0))


def load_dataset(records: list[ManifestRecord], base_dir: str | Path,
                 side: int = 64, color_space: str = "rgb") -> DatasetArrays:
    """Decode, convert, resize and normalize every record's image."""
    if not records:
        raise DataError("no records to load")
    space = color_space.lower()
    if space not in ("rgb", "ycrcb"):
        raise UsageError(f"unknown color space {color_space!r}")
    base = Path(base_dir)
    ids, imgs, labels = [], [], []
    for r in records:
        img = load_image(base / r.path)
        if space == "ycrcb":
            img = rgb_to_ycrcb(img)
        img = resize_bilinear(img, side)
        imgs.append(img.data.astype(np.float32).transpose(2, 0, 1) / np.float32(255.0))
        ids.append(r.id)
        labels.append(-1 if r.class_label is None else r.class_label)
    return DatasetArrays(ids, np.stack(imgs), np.asarray(labels, dtype=np.int64))


def _index_stream(n: int, seed: int, domain_tag: int, epoch: int) -> Iterator[int]:
    cycle = 0
    while True:
        rng = np.random.default_rng([seed, domain_tag, epoch, cycle])
        for i in rng.permutation(n):
            yield int(i)
        cycle += 1


def _take(stream: Iterator[int], k: int) -> np.ndarray:
    return np.fromiter((next(stream) for _ in range(k)), dtype=np.int64, count=k)


def source_batch_iterator(source: DatasetArrays, batch_size: int, seed: int,
                          epoch: int = 0) -> Iterator[Batch]:
    """Seeded shuffle over the source set; drops the ragged tail batch."""
    if batch_size > len(source):
        raise UsageError("batch size exceeds the dataset size")
    stream = _index_stream(len(source), seed, SOURCE_DOMAIN, epoch)
    for _ in range(len(source) // batch_size):
        idx = _take(stream, batch_size)
        yield Batch(images=Tensor(source.images[idx]),
                    domain_labels=np.zeros(batch_size, dtype=np.int64),
                    class_labels=source.labels[idx])


def paired_batch_iterator(source: DatasetArrays, target: DatasetArrays,
                          batch_size: int, seed: int,
                          epoch: int = 0) -> Iterator[tuple[Batch, Batch]]:
    """Equal-sized source/target batches; one epoch spans the larger set.

    The smaller set is reshuffled and cycled. The source-side shuffle is
    the same stream :func:`source_batch_iterator` draws, so a source-only
    run consumes identical source batches under the same seed.
    """
    if len(source) == 0 or len(target) == 0:
        raise UsageError("both manifests must be non-empty")
    if batch_size > len(source) or batch_size > len(target):
        raise UsageError("batch size exceeds a dataset size")
    src_stream = _index_stream(len(source), seed, SOURCE_DOMAIN, epoch)
    tgt_stream = _index_stream(len(target), seed, TARGET_DOMAIN, epoch)
    steps = max(len(source), len(target)) // batch_size
    for _ in range(steps):
        s_idx = _take(src_stream, batch_size)
        t_idx = _take(tgt_stream, batch_size)
        yield (
            Batch(images=Tensor(source.images[s_idx]),
                  domain_labels=np.zeros(batch_size, dtype=np.int64),
                  class_labels=source.labels[s_idx]),
            # unsupervised contract: target class labels are never exposed
            Batch(images=Tensor(target.images[t_idx]),
                  domain_labels=np.ones(batch_size, dtype=np.int64),
                  class_labels=None),
        )
