"""Backbone presets and the two-head network (feature extractor,
source-classifier head, domain-classifier head behind gradient reversal)."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .nn.layers import (Conv2D, Flatten, FullyConnected, GradientReversal,
                        Layer, MaxPool2D, ReLU, run_backward, run_forward,
                        stack_parameters)
from .nn.tensor import Tensor

PRESETS = ("alexnet_small", "vgg7_small")
CHECKPOINT_MAGIC = b"FORGEKIT-CKPT-1\n"


@dataclass
class NetworkSpec:
    """Shape contract for a preset backbone plus the two heads."""

    preset: str = "alexnet_small"
    input_side: int = 64
    in_channels: int = 3
    feature_dim: int = 256
    head_hidden: int = 64

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {PRESETS}, got {self.preset!r}")
        divisor = 16 if self.preset == "alexnet_small" else 8
        if self.input_side % divisor != 0 or self.input_side < divisor:
            raise ConfigError(
                f"{self.preset} needs input_side divisible by {divisor}, got {self.input_side}")


class TwoHeadNetwork:
    """Extractor plus class head, and a domain head behind gradient reversal.

    The three parameter groups are disjoint by construction; both heads
    consume the same feature tensor.
    """

    def __init__(self, extractor: list[Layer], source_head: list[Layer],
                 domain_head: list[Layer], spec: NetworkSpec | None = None):
        if not domain_head or not isinstance(domain_head[0], GradientReversal):
            raise ConfigError("domain head must start with a GradientReversal layer")
        self.extractor = extractor
        self.source_head = source_head
        self.domain_head = domain_head
        self.spec = spec

    # -- parameter groups ------------------------------------------------
    def extractor_parameters(self) -> list[Tensor]:
        return stack_parameters(self.extractor)

    def source_parameters(self) -> list[Tensor]:
        return stack_parameters(self.source_head)

    def domain_parameters(self) -> list[Tensor]:
        return stack_parameters(self.domain_head)

    def all_parameters(self) -> list[Tensor]:
        return (self.extractor_parameters() + self.source_parameters()
                + self.domain_parameters())

    def zero_grad(self) -> None:
        for p in self.all_parameters():
            p.zero_grad()

    # -- forward / backward ----------------------------------------------
    def forward_features(self, images: Tensor, cache: bool = True) -> Tensor:
        return run_forward(self.extractor, images, cache=cache)

    def forward_source(self, features: Tensor, cache: bool = True) -> Tensor:
        return run_forward(self.source_head, features, cache=cache)

    def forward_domain(self, features: Tensor, lam: float, cache: bool = True) -> Tensor:
        self.domain_head[0].lam = lam
        return run_forward(self.domain_head, features, cache=cache)

    def backward_source(self, grad_logits: Tensor) -> Tensor:
        return run_backward(self.source_head, grad_logits)

    def backward_domain(self, grad_logits: Tensor) -> Tensor:
        return run_backward(self.domain_head, grad_logits)

    def backward_extractor(self, grad_features: Tensor) -> Tensor:
        return run_backward(self.extractor, grad_features)

    def predict_classes(self, images: Tensor) -> np.ndarray:
        logits = self.forward_source(self.forward_features(images, cache=False),
                                     cache=False)
        return logits.data.argmax(axis=1)


def forward_full(net: TwoHeadNetwork, images: Tensor, lam: float = 0.0,
                 cache: bool = False) -> tuple[Tensor, Tensor, Tensor]:
    """(class_logits, domain_logits, features) with features computed once."""
    features = net.forward_features(images, cache=cache)
    class_logits = net.forward_source(features, cache=cache)
    domain_logits = net.forward_domain(features, lam, cache=cache)
    return class_logits, domain_logits, features


def _extractor_layers(spec: NetworkSpec, rng: np.random.Generator) -> list[Layer]:
    side = spec.input_side
    if spec.preset == "alexnet_small":
        layers: list[Layer] = [
            Conv2D(spec.in_channels, 16, 5, stride=2, padding=2, rng=rng), ReLU(),
            MaxPool2D(2),
            Conv2D(16, 32, 3, padding=1, rng=rng), ReLU(), MaxPool2D(2),
            Conv2D(32, 64, 3, padding=1, rng=rng), ReLU(), MaxPool2D(2),
            Flatten(),
        ]
        flat = 64 * (side // 16) ** 2
    else:  # vgg7_small: six 3x3 convs (pool after each pair) + one fc
        widths = (16, 16, 32, 32, 64, 64)
        layers = []
        prev = spec.in_channels
        for i, width in enumerate(widths):
            layers += [Conv2D(prev, width, 3, padding=1, rng=rng), ReLU()]
            if i % 2 == 1:
                layers.append(MaxPool2D(2))
            prev = width
        layers.append(Flatten())
        flat = 64 * (side // 8) ** 2
    layers += [FullyConnected(flat, spec.feature_dim, rng=rng), ReLU()]
    return layers


def build_network(spec: NetworkSpec, seed: int) -> TwoHeadNetwork:
    """Deterministically initialize a preset two-head network from a seed."""
    rng = np.random.default_rng([seed, 0x6e657477])
    extractor = _extractor_layers(spec, rng)
    source_head: list[Layer] = [
        FullyConnected(spec.feature_dim, spec.head_hidden, rng=rng), ReLU(),
        FullyConnected(spec.head_hidden, 2, rng=rng),
    ]
    domain_head: list[Layer] = [
        GradientReversal(),
        FullyConnected(spec.feature_dim, spec.head_hidden, rng=rng), ReLU(),
        FullyConnected(spec.head_hidden, 2, rng=rng),
    ]
    return TwoHeadNetwork(extractor, source_head, domain_head, spec)


def parameter_count(net: TwoHeadNetwork) -> int:
    return sum(p.size for p in net.all_parameters())


def _named_parameters(net: TwoHeadNetwork) -> list[tuple[str, Tensor]]:
    named = []
    for group, layers in (("extractor", net.extractor),
                          ("source_head", net.source_head),
                          ("domain_head", net.domain_head)):
        for i, layer in enumerate(layers):
            for j, p in enumerate(layer.parameters()):
                named.append((f"{group}.{i}.{j}", p))
    return named


def save_checkpoint(net: TwoHeadNetwork, path: str | Path,
                    meta: dict | None = None) -> None:
    """Write a byte-stable container: magic, JSON header, raw blobs.

    Identical parameters and metadata always produce identical bytes, so
    determinism can be checked by hashing the file.
    """
    named = _named_parameters(net)
    header = {
        "format": 1,
        "spec": asdict(net.spec) if net.spec is not None else None,
        "meta": meta or {},
        "arrays": [{"name": name, "shape": list(p.shape),
                    "dtype": str(p.dtype)} for name, p in named],
    }
    payload = json.dumps(header, sort_keys=True).encode() + b"\n"
    blobs = b"".join(np.ascontiguousarray(p.data).astype(p.data.dtype.newbyteorder("<")).tobytes()
                     for _, p in named)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(CHECKPOINT_MAGIC + payload + blobs)


def load_checkpoint(path: str | Path) -> tuple[TwoHeadNetwork, dict]:
    """Rebuild a preset network from a checkpoint; returns (net, meta)."""
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise DataError(f"{path} is not a forgekit checkpoint")
    rest = raw[len(CHECKPOINT_MAGIC):]
    newline = rest.index(b"\n")
    header = json.loads(rest[:newline])
    blob = rest[newline + 1:]
    if header.get("spec") is None:
        raise DataError("checkpoint lacks a network spec; cannot rebuild")
    spec = NetworkSpec(**header["spec"])
    net = build_network(spec, seed=0)
    named = dict(_named_parameters(net))
    offset = 0
    for entry in header["arrays"]:
        p = named[entry["name"]]
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        n_bytes = int(np.prod(entry["shape"])) * dtype.itemsize if entry["shape"] else dtype.itemsize
        arr = np.frombuffer(blob[offset:offset + n_bytes], dtype=dtype)
        p.data = np.ascontiguousarray(arr.reshape(entry["shape"]).astype(p.data.dtype))
        offset += n_bytes
    if offset != len(blob):
        raise DataError("checkpoint payload size mismatch")
    return net, header.get("meta", {})
