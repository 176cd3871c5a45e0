"""Unsupervised domain-adaptation trainers.

Two regimes plus a baseline:
  * adversarial: minimize class loss while the feature extractor receives
    the reversed gradient of a domain classifier (minimax via gradient
    reversal);
  * mean-discrepancy penalty: class loss plus a weight times the squared
    maximum mean discrepancy between source and target features;
  * source-only supervised training, the oracle for adaptation gain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data.batching import (Batch, DatasetArrays, paired_batch_iterator,
                            source_batch_iterator)
from .errors import NumericError, UsageError
from .models import TwoHeadNetwork, save_checkpoint
from .nn.losses import softmax_cross_entropy
from .nn.optim import Adam, Optimizer, SGDMomentum
from .nn.tensor import Tensor


@dataclass
class DannConfig:
    """Adversarial trainer: Adam on all three parameter groups.

    ``warmup_epochs`` hold the reversal coefficient at zero so the class
    structure settles before the adversarial game starts; the schedule's
    progress is measured over the remaining epochs.
    """

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    schedule: str = "annealed"  # or "constant"
    delta: float = 1.0          # reversal coefficient for the constant schedule
    warmup_epochs: int = 0
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise UsageError("lr must be positive")
        if self.delta < 0:
            raise UsageError("delta must be >= 0")
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise UsageError("warmup_epochs must lie in [0, epochs]")
        if self.schedule not in ("constant", "annealed"):
            raise UsageError(f"unknown schedule {self.schedule!r}")


@dataclass
class DdcConfig:
    """Discrepancy-penalty trainer: SGD momentum on extractor + class head."""

    lr: float = 0.0001
    momentum: float = 0.9
    mmd_penalty: float = 0.25
    kernel: str = "identity"  # or "rbf"
    rbf_bandwidth: float = 1.0
    warmup_epochs: int = 0  # penalty held at zero while the classifier settles
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise UsageError("lr must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise UsageError("momentum must lie in [0, 1)")
        if self.mmd_penalty < 0:
            raise UsageError("mmd penalty must be >= 0")
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise UsageError("warmup_epochs must lie in [0, epochs]")
        if self.kernel not in ("identity", "rbf"):
            raise UsageError(f"unknown kernel {self.kernel!r}")


@dataclass
class SourceOnlyConfig:
    """Supervised baseline; optimizer choice mirrors the DA trainers."""

    optimizer: str = "adam"  # or "sgd"
    lr: float = 0.001
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise UsageError(f"unknown optimizer {self.optimizer!r}")


TrainConfig = DannConfig | DdcConfig | SourceOnlyConfig


@dataclass
class EpochStats:
    epoch: int
    loss_class: float
    loss_domain_or_mmd2: float
    source_train_accuracy: float
    target_accuracy: float | None = None


@dataclass
class TrainHistory:
    entries: list[EpochStats] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,loss_class,loss_domain_or_mmd2,source_train_acc,target_acc"]
        for e in self.entries:
            tgt = "" if e.target_accuracy is None else f"{e.target_accuracy:.6f}"
            lines.append(f"{e.epoch},{e.loss_class:.6f},{e.loss_domain_or_mmd2:.6f},"
                         f"{e.source_train_accuracy:.6f},{tgt}")
        return "\n".join(lines) + "\n"


def lambda_schedule(progress: float, mode: str = "annealed", delta: float = 1.0) -> float:
    """Reversal coefficient over training progress in [0, 1]."""
    if not 0.0 <= progress <= 1.0:
        raise UsageError("progress must lie in [0, 1]")
    if mode == "constant":
        return delta
    if mode == "annealed":
        return 2.0 / (1.0 + math.exp(-10.0 * progress)) - 1.0
    raise UsageError(f"unknown schedule {mode!r}")


# ---------------------------------------------------------------------------
# Maximum mean discrepancy
# ---------------------------------------------------------------------------

def compute_mmd(source_feats: np.ndarray, target_feats: np.ndarray,
                kernel: str = "identity", bandwidth: float = 1.0) -> float:
    """Distance between feature sets: identity kernel gives the Euclidean
    norm of the difference of means; rbf gives the biased kernel estimate."""
    mmd2, _, _ = mmd_squared_with_grads(source_feats, target_feats,
                                        kernel=kernel, bandwidth=bandwidth,
                                        need_grads=False)
    return math.sqrt(max(0.0, mmd2))


def mmd_squared_with_grads(source_feats: np.ndarray, target_feats: np.ndarray,
                           kernel: str = "identity", bandwidth: float = 1.0,
                           need_grads: bool = True,
                           ) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    """Squared MMD plus its gradients w.r.t. each feature row."""
    s = np.asarray(source_feats, dtype=np.float64)
    t = np.asarray(target_feats, dtype=np.float64)
    if s.ndim != 2 or t.ndim != 2 or s.shape[1] != t.shape[1]:
        raise UsageError(f"feature sets {s.shape} and {t.shape} are incompatible")
    if s.shape[0] < 1 or t.shape[0] < 1:
        raise UsageError("feature sets must be non-empty")
    ns, nt = s.shape[0], t.shape[0]

    if kernel == "identity":
        diff = s.mean(axis=0) - t.mean(axis=0)
        mmd2 = float(diff @ diff)
        if not need_grads:
            return mmd2, None, None
        ds = np.broadcast_to(2.0 * diff / ns, s.shape).copy()
        dt = np.broadcast_to(-2.0 * diff / nt, t.shape).copy()
        return mmd2, ds, dt

    if kernel != "rbf":
        raise UsageError(f"unknown kernel {kernel!r}")
    if bandwidth <= 0:
        raise UsageError("rbf bandwidth must be positive")
    sigma2 = bandwidth * bandwidth

    def gram(a, b):
        sq = (np.square(a).sum(axis=1)[:, None] + np.square(b).sum(axis=1)[None, :]
              - 2.0 * a @ b.T)
        return np.exp(-np.maximum(sq, 0.0) / (2.0 * sigma2))

    k_ss, k_tt, k_st = gram(s, s), gram(t, t), gram(s, t)
    mmd2 = float(k_ss.mean() + k_tt.mean() - 2.0 * k_st.mean())
    if not need_grads:
        return mmd2, None, None

    # d/ds_i exp(-|s_i - x|^2 / 2 sigma^2) = k * (x - s_i) / sigma^2
    ds = (2.0 / (ns * ns * sigma2)) * (k_ss @ s - k_ss.sum(axis=1)[:, None] * s) \
        - (2.0 / (ns * nt * sigma2)) * (k_st @ t - k_st.sum(axis=1)[:, None] * s)
    dt = (2.0 / (nt * nt * sigma2)) * (k_tt @ t - k_tt.sum(axis=1)[:, None] * t) \
        - (2.0 / (ns * nt * sigma2)) * (k_st.T @ s - k_st.sum(axis=0)[:, None] * t)
    return mmd2, ds, dt


# ---------------------------------------------------------------------------
# Single optimization steps
# ---------------------------------------------------------------------------

def _require_source_labels(batch: Batch) -> np.ndarray:
    if batch.class_labels is None or np.any(batch.class_labels < 0):
        raise UsageError("source batch must carry class labels "
                         "(target labels stay unused by contract)")
    return batch.class_labels


def source_only_step(net: TwoHeadNetwork, source_batch: Batch,
                     optimizer: Optimizer) -> float:
    labels = _require_source_labels(source_batch)
    optimizer.zero_grad()
    features = net.forward_features(source_batch.images)
    logits = net.forward_source(features)
    loss, dlogits = softmax_cross_entropy(logits, labels)
    net.backward_extractor(net.backward_source(dlogits))
    optimizer.step()
    return loss


def dann_step(net: TwoHeadNetwork, source_batch: Batch, target_batch: Batch,
              lam: float, optimizer: Optimizer) -> tuple[float, float]:
    """One adversarial step; returns (class loss, domain loss).

    The domain loss is the cross-entropy of the domain head over the
    concatenated source+target rows; reversal delivers ``-lam`` times its
    feature gradient to the extractor while the head itself descends.
    """
    labels = _require_source_labels(source_batch)
    optimizer.zero_grad()

    # source pass: class head plus domain head on source rows
    feats_s = net.forward_features(source_batch.images)
    class_logits = net.forward_source(feats_s)
    loss_class, dlogits = softmax_cross_entropy(class_logits, labels)
    gfeat_class = net.backward_source(dlogits)

    dom_logits_s = net.forward_domain(feats_s, lam)
    loss_dom_s, ddom_s = softmax_cross_entropy(dom_logits_s, source_batch.domain_labels)
    gfeat_dom_s = net.backward_domain(Tensor(0.5 * ddom_s.data))
    net.backward_extractor(Tensor(gfeat_class.data + gfeat_dom_s.data))

    # target pass: domain head only
    feats_t = net.forward_features(target_batch.images)
    dom_logits_t = net.forward_domain(feats_t, lam)
    loss_dom_t, ddom_t = softmax_cross_entropy(dom_logits_t, target_batch.domain_labels)
    gfeat_dom_t = net.backward_domain(Tensor(0.5 * ddom_t.data))
    net.backward_extractor(gfeat_dom_t)

    optimizer.step()
    return loss_class, 0.5 * (loss_dom_s + loss_dom_t)


def ddc_step(net: TwoHeadNetwork, source_batch: Batch, target_batch: Batch,
             config: DdcConfig, optimizer: Optimizer) -> tuple[float, float]:
    """One penalty step; returns (class loss, squared MMD).

    Total objective: class cross-entropy + penalty * MMD^2 between the
    shared extractor's source and target features. The domain head is
    untouched.
    """
    labels = _require_source_labels(source_batch)
    optimizer.zero_grad()

    feats_s = net.forward_features(source_batch.images)
    class_logits = net.forward_source(feats_s)
    loss_class, dlogits = softmax_cross_entropy(class_logits, labels)

    feats_t = net.forward_features(target_batch.images)
    mmd2, dfs, dft = mmd_squared_with_grads(
        feats_s.data, feats_t.data, kernel=config.kernel,
        bandwidth=config.rbf_bandwidth)
    if not np.isfinite(mmd2):
        raise NumericError("non-finite MMD")

    alpha = config.mmd_penalty
    dtype = feats_t.data.dtype
    if alpha == 0.0:
        gt = np.zeros_like(feats_t.data)
        gs_pen = np.zeros_like(feats_s.data)
    else:
        gt = (alpha * dft).astype(dtype)
        gs_pen = (alpha * dfs).astype(dtype)

    net.backward_extractor(Tensor(gt))  # caches pop LIFO: target first
    gfeat_class = net.backward_source(dlogits)
    net.backward_extractor(Tensor(gfeat_class.data + gs_pen))

    optimizer.step()
    return loss_class, mmd2


# ---------------------------------------------------------------------------
# Epoch loops
# ---------------------------------------------------------------------------

def make_optimizer(net: TwoHeadNetwork, config: TrainConfig) -> Optimizer:
    if isinstance(config, DannConfig):
        return Adam(net.all_parameters(), lr=config.lr,
                    beta1=config.beta1, beta2=config.beta2)
    if isinstance(config, DdcConfig):
        return SGDMomentum(net.extractor_parameters() + net.source_parameters(),
                           lr=config.lr, momentum=config.momentum)
    if config.optimizer == "adam":
        return Adam(net.extractor_parameters() + net.source_parameters(),
                    lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    return SGDMomentum(net.extractor_parameters() + net.source_parameters(),
                       lr=config.lr, momentum=config.momentum)


def classification_accuracy(net: TwoHeadNetwork, data: DatasetArrays,
                            chunk: int = 256) -> float:
    """Accuracy of the class head over every labeled record."""
    labeled = data.labels >= 0
    if not labeled.any():
        raise UsageError("dataset has no labeled records to score")
    hits = 0
    idx = np.flatnonzero(labeled)
    for start in range(0, idx.size, chunk):
        sel = idx[start:start + chunk]
        preds = net.predict_classes(Tensor(data.images[sel]))
        hits += int((preds == data.labels[sel]).sum())
    return hits / idx.size


def train_arrays(net: TwoHeadNetwork, source: DatasetArrays,
                 target: DatasetArrays | None, config: TrainConfig,
                 checkpoint_dir: str | Path | None = None,
                 checkpoint_meta: dict | None = None,
                 eval_target: DatasetArrays | None = None) -> TrainHistory:
    """Run the configured number of epochs over in-memory datasets.

    Aborts with :class:`NumericError` on a non-finite loss. When
    ``checkpoint_dir`` is set, a checkpoint is written after every epoch.
    """
    source_only = isinstance(config, SourceOnlyConfig)
    if not source_only and target is None:
        raise UsageError("domain-adaptation training needs a target dataset")
    optimizer = make_optimizer(net, config)
    history = TrainHistory()

    if source_only:
        steps_per_epoch = len(source) // config.batch_size
    else:
        steps_per_epoch = max(len(source), len(target)) // config.batch_size
    warmup_epochs = getattr(config, "warmup_epochs", 0)
    adapt_steps = max(1, (config.epochs - warmup_epochs) * steps_per_epoch)
    if isinstance(config, DdcConfig):
        ddc_warmup = replace(config, mmd_penalty=0.0)
    global_step = 0

    for epoch in range(config.epochs):
        sum_class, sum_other, n_steps = 0.0, 0.0, 0
        warm = epoch < warmup_epochs
        if source_only:
            for sb in source_batch_iterator(source, config.batch_size,
                                            config.seed, epoch):
                sum_class += source_only_step(net, sb, optimizer)
                global_step += 1
                n_steps += 1
        else:
            for sb, tb in paired_batch_iterator(source, target, config.batch_size,
                                                config.seed, epoch):
                if isinstance(config, DannConfig):
                    if warm:
                        lam = 0.0
                    else:
                        done = global_step - warmup_epochs * steps_per_epoch
                        progress = min(1.0, max(0.0, done / adapt_steps))
                        lam = lambda_schedule(progress, config.schedule, config.delta)
                    loss_c, loss_o = dann_step(net, sb, tb, lam, optimizer)
                else:
                    step_config = ddc_warmup if warm else config
                    loss_c, loss_o = ddc_step(net, sb, tb, step_config, optimizer)
                sum_class += loss_c
                sum_other += loss_o
                global_step += 1
                n_steps += 1

        denom = max(1, n_steps)
        stats = EpochStats(
            epoch=epoch,
            loss_class=sum_class / denom,
            loss_domain_or_mmd2=sum_other / denom,
            source_train_accuracy=classification_accuracy(net, source),
            target_accuracy=(classification_accuracy(net, eval_target)
                             if eval_target is not None and eval_target.fully_labeled
                             else None),
        )
        history.entries.append(stats)
        if checkpoint_dir is not None:
            save_checkpoint(net, Path(checkpoint_dir) / f"epoch-{epoch:03d}.ckpt",
                            meta=checkpoint_meta)
    return history


def train_source_only(net: TwoHeadNetwork, source: DatasetArrays,
                      config: SourceOnlyConfig,
                      checkpoint_dir: str | Path | None = None,
                      checkpoint_meta: dict | None = None,
                      eval_target: DatasetArrays | None = None) -> TrainHistory:
    """Supervised baseline on the source domain only."""
    return train_arrays(net, source, None, config, checkpoint_dir,
                        checkpoint_meta, eval_target)
