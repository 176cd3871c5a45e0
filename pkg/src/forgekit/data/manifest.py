"""Dataset manifests: JSON-lines records and deterministic splits."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError, UsageError

DOMAINS = ("source", "target")
SPLITS = ("train", "test")


@dataclass
class ManifestRecord:
    """One dataset item; ``class_label`` is None for unlabeled records."""

    id: str
    path: str
    class_label: int | None = None
    domain: str = "source"
    split: str | None = None
    provenance: dict | None = None

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise DataError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        if self.class_label is not None and self.class_label not in (0, 1):
            raise DataError(f"class must be 0 or 1, got {self.class_label!r}")
        if self.split is not None and self.split not in SPLITS:
            raise DataError(f"split must be one of {SPLITS}, got {self.split!r}")

    def to_json(self) -> str:
        doc: dict = {"id": self.id, "path": self.path}
        if self.class_label is not None:
            doc["class"] = self.class_label
        doc["domain"] = self.domain
        if self.split is not None:
            doc["split"] = self.split
        if self.provenance is not None:
            doc["provenance"] = self.provenance
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ManifestRecord":
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"bad manifest line: {exc}") from exc
        return cls(id=doc["id"], path=doc["path"], class_label=doc.get("class"),
                   domain=doc.get("domain", "source"), split=doc.get("split"),
                   provenance=doc.get("provenance"))


def write_manifest(records: list[ManifestRecord], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    lines = [r.to_json() for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    records = [ManifestRecord.from_json(line)
               for line in text.splitlines() if line.strip()]
    seen = set()
    for r in records:
        if r.id in seen:
            raise DataError(f"duplicate record id {r.id!r}")
        seen.add(r.id)
    return records


def split_dataset(records: list[ManifestRecord], train_fraction: float = 0.8,
                  seed: int = 0) -> list[ManifestRecord]:
    """Assign train/test split tags by per-class stratified shuffle.

    Each class stratum (unlabeled records form their own stratum) is
    permuted by the seed; the first floor(fraction * n) go to train and
    the remainder to test. Returns new records in the input order.
    """
    if not records:
        raise UsageError("cannot split an empty manifest")
    if not 0.0 < train_fraction < 1.0:
        raise UsageError("train fraction must lie strictly between 0 and 1")

    rng = np.random.default_rng(seed)
    assignment: dict[str, str] = {}
    strata: dict[object, list[ManifestRecord]] = {}
    for r in records:
        strata.setdefault(r.class_label, []).append(r)
    for key in sorted(strata, key=lambda k: (k is None, k)):
        group = strata[key]
        order = rng.permutation(len(group))
        n_train = int(np.floor(train_fraction * len(group)))
        for rank, idx in enumerate(order):
            assignment[group[idx].id] = "train" if rank < n_train else "test"

    return [ManifestRecord(id=r.id, path=r.path, class_label=r.class_label,
                           domain=r.domain, split=assignment[r.id],
                           provenance=r.provenance)
            for r in records]
