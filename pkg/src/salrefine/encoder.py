"""Two-stream convolutional encoder, channel alignment and adjacent-level fusion."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .datamodel import FeaturePyramid
from .errors import ChannelMismatchError, ConfigError, IndivisibleResolutionError


def resize(x, size):
    if tuple(x.shape[-2:]) == tuple(size):
        return x
    return F.interpolate(x, size=tuple(size), mode="bilinear", align_corners=False)


class ConvBNReLU(nn.Sequential):
    def __init__(self, cin, cout, kernel_size=3):
        super().__init__(
            nn.Conv2d(cin, cout, kernel_size, padding=kernel_size // 2, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=True),
        )


@dataclass(frozen=True)
class BackboneConfig:
    channels_per_block: tuple
    stride_per_block: tuple
    stream: str = "spatial"
    in_channels: int = 3

    def __post_init__(self):
        if len(self.channels_per_block) != len(self.stride_per_block):
            raise ConfigError("channels_per_block and stride_per_block need equal length")
        if len(self.channels_per_block) < 2:
            raise ConfigError("a backbone needs at least two blocks")
        if self.stream not in ("spatial", "temporal"):
            raise ConfigError(f"unknown stream {self.stream!r}")

    @property
    def num_blocks(self):
        return len(self.channels_per_block)

    @property
    def total_stride(self):
        out = 1
        for s in self.stride_per_block:
            out *= s
        return out

    @property
    def level_strides(self):
        out, acc = [], 1
        for s in self.stride_per_block:
            acc *= s
            out.append(acc)
        return out


class Backbone(nn.Module):
    """Each block: two 3x3 conv-BN-ReLU layers, then max-pool downsampling."""

    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.config = config
        blocks = []
        cin = config.in_channels
        for cout, stride in zip(config.channels_per_block, config.stride_per_block):
            layers = [ConvBNReLU(cin, cout), ConvBNReLU(cout, cout)]
            if stride > 1:
                layers.append(nn.MaxPool2d(stride))
            blocks.append(nn.Sequential(*layers))
            cin = cout
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x) -> FeaturePyramid:
        stride = self.config.total_stride
        if x.shape[-1] % stride or x.shape[-2] % stride:
            raise IndivisibleResolutionError(
                f"input {tuple(x.shape[-2:])} is not divisible by total stride {stride}"
            )
        levels = []
        for block in self.blocks:
            x = block(x)
            levels.append(x)
        return FeaturePyramid(levels, self.config.stream, self.config.level_strides)


def extract_features(image, backbone: Backbone) -> FeaturePyramid:
    """Run a backbone on one (3, H, W) image or a (B, 3, H, W) batch."""
    if image.dim() == 3:
        image = image[None]
    return backbone(image)


class ChannelAlign(nn.Module):
    """Per-level 1x1 conv-BN-ReLU mapping every level to ``c0`` channels."""

    def __init__(self, channels, c0):
        super().__init__()
        self.c0 = c0
        self.convs = nn.ModuleList(ConvBNReLU(c, c0, kernel_size=1) for c in channels)

    def forward(self, pyramid: FeaturePyramid) -> FeaturePyramid:
        if len(pyramid) != len(self.convs):
            raise ChannelMismatchError(f"expected {len(self.convs)} levels, got {len(pyramid)}")
        levels = []
        for conv, lvl in zip(self.convs, pyramid.levels):
            if lvl.shape[1] != conv[0].in_channels:
                raise ChannelMismatchError(
                    f"level has {lvl.shape[1]} channels, aligner expects {conv[0].in_channels}"
                )
            levels.append(conv(lvl))
        return FeaturePyramid(levels, pyramid.stream_tag, list(pyramid.stride_per_level))


def channel_align(pyramid: FeaturePyramid, aligner: ChannelAlign) -> FeaturePyramid:
    return aligner(pyramid)


class FusionUnit(nn.Module):
    """Residual multiplicative fusion of (f_s_l, f_s_{l-1}, f_t_l).

    The correction's BN scale starts at zero, so a fresh unit is the identity.
    """

    def __init__(self, c0):
        super().__init__()
        self.c0 = c0
        self.correction = ConvBNReLU(c0, c0)
        nn.init.zeros_(self.correction[1].weight)

    def forward(self, f_s_l, f_s_lm1, f_t_l):
        return fuse_adjacent(f_s_l, f_s_lm1, f_t_l, self.correction)


def fuse_adjacent(f_s_l, f_s_lm1, f_t_l, correction):
    c = f_s_l.shape[1]
    if f_s_lm1.shape[1] != c or f_t_l.shape[1] != c:
        raise ChannelMismatchError(
            f"fusion inputs disagree on channels: {f_s_l.shape[1]}, {f_s_lm1.shape[1]}, {f_t_l.shape[1]}"
        )
    fine = f_s_lm1.shape[-2:]
    product = resize(f_s_l, fine) * f_s_lm1 * resize(f_t_l, fine)
    delta = correction(product)
    return (
        f_s_l + resize(delta, f_s_l.shape[-2:]),
        f_s_lm1 + delta,
        f_t_l + resize(delta, f_t_l.shape[-2:]),
    )


class TwoStreamEncoder(nn.Module):
    """Spatial and temporal backbones, channel alignment and the bottom-up fusion chain."""

    def __init__(self, config):
        super().__init__()
        strides = config.block_strides
        c0 = config.aligned_channels
        self.spatial = Backbone(BackboneConfig(config.spatial_channels, strides, "spatial"))
        self.temporal = Backbone(BackboneConfig(config.temporal_channels, strides, "temporal"))
        self.align_s = ChannelAlign(config.spatial_channels, c0)
        self.align_t = ChannelAlign(config.temporal_channels, c0)
        self.fusions = nn.ModuleList(FusionUnit(c0) for _ in range(config.num_levels - 1))

    def backbone(self, frame, flow):
        s = self.align_s(self.spatial(frame))
        t = self.align_t(self.temporal(flow))
        return s, t

    def fuse(self, s: FeaturePyramid, t: FeaturePyramid):
        s_levels = list(s.levels)
        t_levels = list(t.levels)
        # bottom-up: the finest pair first, each fusion reads the latest features
        for l, unit in enumerate(self.fusions, start=1):
            s_levels[l], s_levels[l - 1], t_levels[l] = unit(s_levels[l], s_levels[l - 1], t_levels[l])
        return (
            FeaturePyramid(s_levels, "fused", list(s.stride_per_level)),
            FeaturePyramid(t_levels, "fused", list(t.stride_per_level)),
        )

    def forward(self, frame, flow):
        return self.fuse(*self.backbone(frame, flow))
