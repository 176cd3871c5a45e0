"""Dataset model: manifests, splits, color transforms, batching."""
from .batching import (Batch, DatasetArrays, load_dataset,
                       paired_batch_iterator, source_batch_iterator)
from .manifest import ManifestRecord, read_manifest, split_dataset, write_manifest
from .transforms import resize_bilinear, rgb_to_ycrcb, ycrcb_to_rgb

__all__ = [
    "Batch", "DatasetArrays", "ManifestRecord", "load_dataset",
    "paired_batch_iterator", "read_manifest", "resize_bilinear",
    "rgb_to_ycrcb", "source_batch_iterator", "split_dataset",
    "write_manifest", "ycrcb_to_rgb",
]
