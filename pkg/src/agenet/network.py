"""Multi-scale attentional residual backbone.

Each block runs three parallel convolutions (1x1 at a quarter of the output
channels, 3x3 at half, 5x5 at a quarter), concatenates them, gates the result
with channel attention, and adds a shortcut. Stages follow a fixed block/
channel plan; the first block of every stage after the first downsamples by
stride 2 with a 1x1 projection shortcut.

No normalization layers anywhere: training stays deterministic and the
engine stays small. ReLU is applied after the stem, after the multi-scale
concatenation, and after the residual add.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import (Tensor, accumulate_grad, add, concat_channels, concat_vec,
                     make_op, mul_channel, relu, sigmoid)
from .ops import affine, conv1d, conv2d, conv2d_output_size, global_avg_pool, maxpool2d

__all__ = [
    "MarcuBlockConfig",
    "NetworkConfig",
    "PRESETS",
    "attention_kernel_rule",
    "eca_attention",
    "Conv2dUnit",
    "AffineUnit",
    "MarcuBlock",
    "Backbone",
    "build_backbone",
    "conv_layer_totals",
]


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv2dUnit:
    """Learnable 2-d convolution: weight uniform in +-sqrt(6/fan_in), zero bias."""

    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int, k: int,
                 stride: int = 1, padding: int = 0):
        self.weight = Tensor(uniform_init(rng, (c_out, c_in, k, k), c_in * k * k),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def named_params(self, prefix: str):
        yield f"{prefix}.weight", self.weight
        yield f"{prefix}.bias", self.bias


class AffineUnit:
    """Learnable fully connected map."""

    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int):
        self.weight = Tensor(uniform_init(rng, (d_in, d_out), d_in), requires_grad=True)
        self.bias = Tensor(np.zeros(d_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return affine(x, self.weight, self.bias)

    def named_params(self, prefix: str):
        yield f"{prefix}.weight", self.weight
        yield f"{prefix}.bias", self.bias


def attention_kernel_rule(channels: int, threshold: int = 128) -> int:
    """Channel-attention kernel width: 3 for narrow maps, 5 for wide ones."""
    if channels <= 0:
        raise ValueError(f"channels must be positive, got {channels}")
    return 3 if channels <= threshold else 5


def eca_attention(x: Tensor, kernel: Tensor) -> Tensor:
    """Channel attention: pool globally, slide a short 1-d convolution across
    the channel vector, squash to (0,1), and rescale every channel."""
    k = kernel.data.shape[0]
    if k not in (3, 5):
        raise ValueError(f"attention kernel width must be 3 or 5, got {k}")
    pooled = global_avg_pool(x)
    gate = sigmoid(conv1d(pooled, kernel))
    return mul_channel(x, gate)


@dataclass(frozen=True)
class MarcuBlockConfig:
    in_channels: int
    out_channels: int
    stride: int
    attention_kernel: int

    def __post_init__(self):
        if self.out_channels % 4 != 0:
            raise ValueError(f"out_channels must be divisible by 4, got {self.out_channels}")
        if self.stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {self.stride}")
        if self.attention_kernel not in (3, 5):
            raise ValueError(f"attention_kernel must be 3 or 5, got {self.attention_kernel}")


def _embed_branch_kernels(k1: Tensor, k3: Tensor, k5: Tensor) -> Tensor:
    """Zero-embed the 1x1 and 3x3 branch kernels at the center of a shared
    5x5 kernel stack. Convolving the stack once at padding 2 produces exactly
    the channel-concatenated output of the three parallel branches (the zero
    taps contribute nothing), for one gather and one matmul per block."""
    co1, co3, co5 = k1.data.shape[0], k3.data.shape[0], k5.data.shape[0]
    c = k1.data.shape[1]
    out_data = np.zeros((co1 + co3 + co5, c, 5, 5))
    out_data[:co1, :, 2:3, 2:3] = k1.data
    out_data[co1:co1 + co3, :, 1:4, 1:4] = k3.data
    out_data[co1 + co3:] = k5.data

    def bw(go: np.ndarray) -> None:
        accumulate_grad(k1, go[:co1, :, 2:3, 2:3])
        accumulate_grad(k3, go[co1:co1 + co3, :, 1:4, 1:4])
        accumulate_grad(k5, go[co1 + co3:])

    return make_op(out_data, (k1, k3, k5), bw)


class MarcuBlock:
    def __init__(self, rng: np.random.Generator, cfg: MarcuBlockConfig):
        self.cfg = cfg
        c_in, c_out, s = cfg.in_channels, cfg.out_channels, cfg.stride
        self.branch1 = Conv2dUnit(rng, c_in, c_out // 4, 1, s, 0)
        self.branch3 = Conv2dUnit(rng, c_in, c_out // 2, 3, s, 1)
        self.branch5 = Conv2dUnit(rng, c_in, c_out // 4, 5, s, 2)
        k = cfg.attention_kernel
        self.attn_kernel = Tensor(uniform_init(rng, (k,), k), requires_grad=True)
        if s != 1 or c_in != c_out:
            self.shortcut: Conv2dUnit | None = Conv2dUnit(rng, c_in, c_out, 1, s, 0)
        else:
            self.shortcut = None

    def multi_scale(self, x: Tensor) -> Tensor:
        kernel = _embed_branch_kernels(self.branch1.weight, self.branch3.weight,
                                       self.branch5.weight)
        bias = concat_vec([self.branch1.bias, self.branch3.bias, self.branch5.bias])
        return relu(conv2d(x, kernel, bias, stride=self.cfg.stride, padding=2))

    def multi_scale_unfused(self, x: Tensor) -> Tensor:
        """Reference path: the three branches convolved separately then
        channel-concatenated; equal to ``multi_scale`` up to summation order."""
        out = concat_channels([self.branch1(x), self.branch3(x), self.branch5(x)])
        return relu(out)

    def __call__(self, x: Tensor) -> Tensor:
        ms = self.multi_scale(x)
        gated = eca_attention(ms, self.attn_kernel)
        sc = self.shortcut(x) if self.shortcut is not None else x
        return relu(add(gated, sc))

    def named_params(self, prefix: str):
        yield from self.branch1.named_params(f"{prefix}.branch1")
        yield from self.branch3.named_params(f"{prefix}.branch3")
        yield from self.branch5.named_params(f"{prefix}.branch5")
        yield f"{prefix}.attn.kernel", self.attn_kernel
        if self.shortcut is not None:
            yield from self.shortcut.named_params(f"{prefix}.shortcut")


def multi_scale_conv(rng: np.random.Generator, cfg: MarcuBlockConfig):
    """Standalone multi-scale convolution stage of a block (branches + concat
    + activation), exposed for direct testing."""
    return MarcuBlock(rng, cfg).multi_scale


@dataclass(frozen=True)
class NetworkConfig:
    name: str
    input_resolution: int
    stem_kernel: int
    stem_channels: int
    stem_stride: int
    stem_padding: int
    pool_kernel: int
    pool_stride: int
    pool_padding: int
    stage_blocks: tuple[int, int, int, int]
    stage_channels: tuple[int, int, int, int]
    attention_threshold: int = 128
    in_channels: int = 3

    def __post_init__(self):
        for c in self.stage_channels:
            if c % 4 != 0:
                raise ValueError(f"stage channels must be divisible by 4, got {c}")
        for n in self.stage_blocks:
            if n < 1:
                raise ValueError("every stage needs at least one block")

    @property
    def feature_dim(self) -> int:
        return self.stage_channels[-1]


PRESETS: dict[str, NetworkConfig] = {
    "paper": NetworkConfig(
        name="paper", input_resolution=224,
        stem_kernel=7, stem_channels=64, stem_stride=2, stem_padding=3,
        pool_kernel=3, pool_stride=2, pool_padding=1,
        stage_blocks=(6, 8, 12, 6), stage_channels=(64, 128, 256, 512),
    ),
    "desk": NetworkConfig(
        name="desk", input_resolution=64,
        stem_kernel=3, stem_channels=16, stem_stride=1, stem_padding=1,
        pool_kernel=2, pool_stride=2, pool_padding=0,
        stage_blocks=(1, 1, 1, 1), stage_channels=(16, 32, 64, 128),
    ),
}


class Backbone:
    def __init__(self, rng: np.random.Generator, cfg: NetworkConfig):
        self.cfg = cfg
        self.stem = Conv2dUnit(rng, cfg.in_channels, cfg.stem_channels,
                               cfg.stem_kernel, cfg.stem_stride, cfg.stem_padding)
        self.stages: list[list[MarcuBlock]] = []
        c_in = cfg.stem_channels
        for s, (n_blocks, c_out) in enumerate(zip(cfg.stage_blocks, cfg.stage_channels)):
            blocks = []
            for b in range(n_blocks):
                stride = 2 if (b == 0 and s > 0) else 1
                bc = MarcuBlockConfig(
                    in_channels=c_in, out_channels=c_out, stride=stride,
                    attention_kernel=attention_kernel_rule(c_out, cfg.attention_threshold),
                )
                blocks.append(MarcuBlock(rng, bc))
                c_in = c_out
            self.stages.append(blocks)
        self.feature_dim = cfg.feature_dim

    def __call__(self, x: Tensor) -> Tensor:
        t = relu(self.stem(x))
        t = maxpool2d(t, self.cfg.pool_kernel, self.cfg.pool_stride, self.cfg.pool_padding)
        for blocks in self.stages:
            for block in blocks:
                t = block(t)
        return global_avg_pool(t)

    def named_params(self, prefix: str = "backbone"):
        yield from self.stem.named_params(f"{prefix}.stem")
        for s, blocks in enumerate(self.stages):
            for b, block in enumerate(blocks):
                yield from block.named_params(f"{prefix}.stage{s + 1}.block{b}")


def spatial_trace(cfg: NetworkConfig) -> list[tuple[str, int, int]]:
    """(name, channels, spatial extent) after the stem, the pool, and each
    stage, computed from the shape formulas."""
    h = conv2d_output_size(cfg.input_resolution, cfg.stem_kernel, cfg.stem_stride, cfg.stem_padding)
    trace = [("stem", cfg.stem_channels, h)]
    h = (h + 2 * cfg.pool_padding - cfg.pool_kernel) // cfg.pool_stride + 1
    trace.append(("pool", cfg.stem_channels, h))
    for s, c in enumerate(cfg.stage_channels):
        if s > 0:
            h = conv2d_output_size(h, 1, 2, 0)
        trace.append((f"stage{s + 1}", c, h))
    return trace


def build_backbone(cfg: NetworkConfig, rng: np.random.Generator) -> tuple[Backbone, list[tuple[str, int, int]]]:
    return Backbone(rng, cfg), spatial_trace(cfg)


def conv_layer_totals(cfg: NetworkConfig) -> dict[str, int]:
    """Depth bookkeeping under the different possible counting rules."""
    blocks = sum(cfg.stage_blocks)
    shortcuts = sum(1 for s in range(4) for b in range(cfg.stage_blocks[s])
                    if b == 0 and (s > 0 or cfg.stem_channels != cfg.stage_channels[0]))
    return {
        "blocks": blocks,
        "branch_convs": 3 * blocks,
        "shortcut_convs": shortcuts,
        "attention_convs": blocks,
        "stem_convs": 1,
        "weighted_convs": 1 + 3 * blocks + shortcuts,
        "weighted_convs_with_attention": 1 + 3 * blocks + shortcuts + blocks,
        "block_level_depth": 1 + blocks + 1,  # stem + blocks + output fc
    }
