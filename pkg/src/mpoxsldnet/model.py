"""Model configuration, the network builder, and parameter accounting.

The network is a ladder of convolution blocks followed by a dense head:

    [Conv2D 3x3 same + ReLU -> BatchNorm -> (MaxPool2D 2x2/2)?] per block
    Flatten
    [Dense + ReLU -> BatchNorm -> Dropout] per hidden width
    Dense(output_units) + Sigmoid

Two pooling presets exist because the architecture admits both readings:
"six-pool" pools after every block (224 -> ... -> 3 spatial), while
"paper-figure" skips the last pool and ends at 7x7 spatial for 224 inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .kernels import ShapeError, pool_output_shape
from .layers import (BatchNorm, Conv2D, Dense, Dropout, Flatten, MaxPool2D,
                     Sequential)
from .rng import Xoshiro256StarStar, derive_seed

PRESETS = ("six-pool", "paper-figure")


@dataclass(frozen=True)
class ModelConfig:
    conv_filters: tuple[int, ...] = (16, 32, 64, 128, 256, 512)
    kernel: int = 3
    pool_after_block: tuple[bool, ...] | None = None  # None: resolve from preset
    preset: str = "six-pool"
    dense_widths: tuple[int, ...] = (256, 128, 64)
    dropout_rate: float = 0.5
    output_units: int = 2
    image_size: int = 224
    in_channels: int = 3

    def pooling(self) -> tuple[bool, ...]:
        if self.pool_after_block is not None:
            if len(self.pool_after_block) != len(self.conv_filters):
                raise ValueError(
                    f"pool_after_block length {len(self.pool_after_block)} != "
                    f"conv_filters length {len(self.conv_filters)}")
            return tuple(self.pool_after_block)
        if self.preset == "six-pool":
            return (True,) * len(self.conv_filters)
        if self.preset == "paper-figure":
            return (True,) * (len(self.conv_filters) - 1) + (False,)
        raise ValueError(f"unknown preset {self.preset!r}; choose from {PRESETS}")

    def with_preset(self, preset: str) -> "ModelConfig":
        return replace(self, preset=preset, pool_after_block=None)


def spatial_chain(config: ModelConfig) -> list[int]:
    """Spatial dim after each block, starting from the input size.

    'same' convolutions preserve the dim, so only pooling shrinks it.
    """
    dims = [config.image_size]
    size = config.image_size
    for pooled in config.pooling():
        if pooled:
            size = pool_output_shape(size)
        dims.append(size)
    return dims


def flatten_width(config: ModelConfig) -> int:
    size = spatial_chain(config)[-1]
    return size * size * config.conv_filters[-1]


class Model(Sequential):
    """Sequential stack plus the config it was built from."""

    def __init__(self, layers, config: ModelConfig):
        super().__init__(layers)
        self.config = config

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.config.image_size, self.config.image_size, self.config.in_channels)


def build_mpoxsldnet(config: ModelConfig, seed: int = 0, dtype=np.float32) -> Model:
    """Construct the network with deterministic initialization.

    Hidden conv/dense weights are He-uniform, the sigmoid output layer is
    Glorot-uniform, biases start at zero, batchnorm at gamma=1, beta=0.
    """
    try:
        width = flatten_width(config)
    except ShapeError as e:
        raise ValueError(f"config shape chain collapses: {e}") from e

    def rng(name: str) -> Xoshiro256StarStar:
        return Xoshiro256StarStar(derive_seed(seed, "init", name))

    layers: list = []
    in_c = config.in_channels
    for b, (filters, pooled) in enumerate(zip(config.conv_filters, config.pooling())):
        layers.append(Conv2D(in_c, filters, kernel=config.kernel, padding="same",
                             activation="relu", init_rng=rng(f"conv{b}"), dtype=dtype))
        layers.append(BatchNorm(filters, dtype=dtype))
        if pooled:
            layers.append(MaxPool2D())
        in_c = filters
    layers.append(Flatten())
    in_dim = width
    for d, units in enumerate(config.dense_widths):
        layers.append(Dense(in_dim, units, activation="relu",
                            init_rng=rng(f"dense{d}"), dtype=dtype))
        layers.append(BatchNorm(units, dtype=dtype))
        layers.append(Dropout(config.dropout_rate))
        in_dim = units
    layers.append(Dense(in_dim, config.output_units, activation="sigmoid",
                        init_rng=rng("head"), dtype=dtype))
    model = Model(layers, config)
    model.reseed_dropout(seed)
    return model


@dataclass
class LayerCount:
    name: str
    output_shape: tuple
    trainable: int
    non_trainable: int


@dataclass
class ParameterTable:
    rows: list[LayerCount] = field(default_factory=list)

    @property
    def trainable(self) -> int:
        return sum(r.trainable for r in self.rows)

    @property
    def non_trainable(self) -> int:
        return sum(r.non_trainable for r in self.rows)

    @property
    def total(self) -> int:
        return self.trainable + self.non_trainable


def count_parameters(model: Model) -> ParameterTable:
    """Per-layer parameter table.

    Conv: kh*kw*in*out + out.  Dense: in*out + out.  BatchNorm: 2*channels
    trainable (gamma, beta) plus 2*channels running statistics.
    """
    table = ParameterTable()
    shape = model.input_shape
    for i, layer in enumerate(model.layers):
        shape = layer.output_shape(shape)
        if isinstance(layer, Conv2D):
            k = layer.kernel
            trainable = k * k * layer.in_channels * layer.filters + layer.filters
            non_trainable = 0
        elif isinstance(layer, Dense):
            trainable = layer.in_dim * layer.units + layer.units
            non_trainable = 0
        elif isinstance(layer, BatchNorm):
            trainable = 2 * layer.num_features
            non_trainable = 2 * layer.num_features
        else:
            trainable = non_trainable = 0
        table.rows.append(LayerCount(f"{i:02d}.{layer.tag}", shape,
                                     trainable, non_trainable))
    return table


def summary_text(model: Model, checkpoint_bytes: int | None = None) -> str:
    """Plain-text summary table: layer, output shape, parameter count."""
    table = count_parameters(model)
    lines = []
    header = f"{'layer':<14} {'output shape':<18} {'params':>10} {'state':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for row in table.rows:
        shape = "x".join(str(d) for d in row.output_shape)
        lines.append(f"{row.name:<14} {shape:<18} {row.trainable:>10} {row.non_trainable:>8}")
    lines.append("-" * len(header))
    lines.append(f"trainable parameters:     {table.trainable}")
    lines.append(f"non-trainable parameters: {table.non_trainable}")
    lines.append(f"total parameters:         {table.total}")
    if checkpoint_bytes is not None:
        lines.append(f"estimated checkpoint size: {checkpoint_bytes} bytes")
    return "\n".join(lines)
