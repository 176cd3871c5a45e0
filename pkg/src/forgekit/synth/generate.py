"""Dataset generation: authentic/forged pairs from an annotated corpus."""
from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..data.manifest import ManifestRecord, write_manifest
from ..errors import ConfigError, DataError, GenerationSkip
from .coco import CorpusItem, load_corpus
from .copymove import CopyMoveSampling, make_copy_move_pair, select_largest_mask
from .inpaint import simple_inpaint
from .raster import RasterImage, load_image, save_image
from .toycorpus import build_toy_corpus

log = logging.getLogger(__name__)


@dataclass
class GenerateConfig:
    count: int = 20
    mix: tuple[int, int] = (3, 1)  # copy-move : inpaint record ratio
    seed: int = 0
    category: str | None = None  # None: use the largest object's category
    domain: str = "source"
    inpaint_iterations: int = 500
    threads: int = 1
    sampling: CopyMoveSampling = field(default_factory=CopyMoveSampling)

    def __post_init__(self):
        if self.count <= 0 or self.count % 2 != 0:
            raise ConfigError("count must be a positive even number (authentic/forged pairs)")
        if len(self.mix) != 2 or min(self.mix) < 0 or sum(self.mix) == 0:
            raise ConfigError("mix must be two non-negative integers, not both zero")


def record_seed(run_seed: int, record_id: str) -> int:
    """Stable per-record seed, independent of scheduling order."""
    digest = hashlib.sha256(f"{run_seed}:{record_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def pair_plan(config: GenerateConfig) -> tuple[int, int]:
    """(copy-move pairs, inpaint pairs) honoring the configured record mix."""
    pairs = config.count // 2
    cm_share, inp_share = config.mix
    inpaint_pairs = pairs * inp_share // (cm_share + inp_share)
    return pairs - inpaint_pairs, inpaint_pairs


def _largest_mask_category(item: CorpusItem) -> str:
    if not item.masks:
        raise GenerationSkip(f"image {item.image_id} has no masks")
    best = max(item.masks, key=lambda m: m.area)
    return best.category


def _make_pair(item: CorpusItem, kind: str, pair_id: str,
               config: GenerateConfig) -> tuple[RasterImage, RasterImage, dict]:
    image = load_image(item.path)
    category = config.category or _largest_mask_category(item)
    seed = record_seed(config.seed, pair_id)
    if kind == "copy_move":
        authentic, forged, provenance = make_copy_move_pair(
            image, item.masks, category, seed,
            sampling=config.sampling, image_id=item.image_id)
        return authentic, forged, provenance.to_dict()
    mask = select_largest_mask(item.masks, category)
    if mask.area * 2 >= mask.bits.size:
        raise GenerationSkip("object too large to inpaint")
    forged = simple_inpaint(image, mask, config.inpaint_iterations)
    provenance = {
        "source_image_id": item.image_id, "category": category,
        "generator_version": "inpaint-1", "seed": seed, "kind": "inpaint",
        "inpaint_iterations": config.inpaint_iterations,
    }
    return image.copy(), forged, provenance


def generate_dataset(annotation_path: str | Path, out_dir: str | Path,
                     config: GenerateConfig,
                     image_dir: str | Path | None = None) -> Path:
    """Write authentic/forged image pairs and their manifest.

    ``annotation_path`` may be the sentinel ``"toy"`` to materialize the
    bundled procedural corpus under ``out_dir/corpus`` first. Per-image
    failures are logged and skipped; the run fails only if the corpus
    cannot supply the requested number of pairs.
    """
    out = Path(out_dir)
    if str(annotation_path) == "toy":
        annotation_path = build_toy_corpus(out / "corpus")
        image_dir = None
    corpus = load_corpus(annotation_path, image_dir)
    if not corpus:
        raise DataError("corpus has no images")

    cm_pairs, inpaint_pairs = pair_plan(config)
    jobs = []  # (pair_id, kind, corpus item)
    cursor = 0

    def next_item() -> CorpusItem:
        nonlocal cursor
        item = corpus[cursor % len(corpus)]
        cursor += 1
        return item

    for k in range(cm_pairs):
        jobs.append((f"cm-{k:05d}", "copy_move", next_item()))
    for k in range(inpaint_pairs):
        jobs.append((f"inp-{k:05d}", "inpaint", next_item()))

    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    records: list[ManifestRecord] = []
    budget = 4 * len(jobs) + len(corpus)

    def run_job(job):
        pair_id, kind, item = job
        return _make_pair(item, kind, pair_id, config)

    pending = list(jobs)
    while pending:
        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                outcomes = list(pool.map(_safe_run, [(run_job, j) for j in pending]))
        else:
            outcomes = [_safe_run((run_job, j)) for j in pending]

        retry = []
        for job, outcome in zip(pending, outcomes):
            pair_id, kind, item = job
            if isinstance(outcome, GenerationSkip):
                budget -= 1
                if budget <= 0:
                    raise DataError(
                        f"corpus cannot supply {len(jobs)} pairs: {outcome}")
                log.warning("skipping %s on %s: %s", pair_id, item.image_id, outcome)
                retry.append((pair_id, kind, next_item()))
                continue
            authentic, forged, provenance = outcome
            a_name, f_name = f"{pair_id}-a.png", f"{pair_id}-f.png"
            save_image(authentic, images_dir / a_name)
            save_image(forged, images_dir / f_name)
            records.append(ManifestRecord(
                id=f"{pair_id}-a", path=f"images/{a_name}", class_label=0,
                domain=config.domain))
            records.append(ManifestRecord(
                id=f"{pair_id}-f", path=f"images/{f_name}", class_label=1,
                domain=config.domain, provenance=provenance))
        pending = retry

    records.sort(key=lambda r: r.id)
    manifest_path = out / "manifest.jsonl"
    write_manifest(records, manifest_path)
    return manifest_path


def _safe_run(call):
    fn, job = call
    try:
        return fn(job)
    except GenerationSkip as skip:
        return skip
