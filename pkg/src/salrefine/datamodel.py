"""Shared value types, validation and seed plumbing."""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .errors import (
    ConfigError,
    DimensionMismatchError,
    NonBinaryMaskError,
    NonFiniteValueError,
)

STREAM_TAGS = ("spatial", "temporal", "fused", "refined")
SALIENCY_STAGES = ("intermediate", "final")
WEIGHTING_MODES = ("gcn", "fc", "none")
LOSS_MODES = ("bce", "combined")


@dataclass(frozen=True, eq=False)
class VideoSample:
    """One frame of a sequence: RGB image, encoded flow, binary mask.

    ``frame`` and ``flow`` are float32 arrays of shape (3, H, W) in [0, 1];
    ``mask`` is float32 (H, W) with values in {0, 1}.
    """

    frame: np.ndarray
    flow: np.ndarray
    mask: np.ndarray
    sequence_id: str
    frame_index: int

    @property
    def size(self):
        return self.mask.shape

    def equals(self, other: "VideoSample") -> bool:
        return (
            self.sequence_id == other.sequence_id
            and self.frame_index == other.frame_index
            and self.frame.dtype == other.frame.dtype
            and np.array_equal(self.frame, other.frame)
            and np.array_equal(self.flow, other.flow)
            and np.array_equal(self.mask, other.mask)
        )


def validate_sample(sample: VideoSample) -> VideoSample:
    frame = np.asarray(sample.frame)
    flow = np.asarray(sample.flow)
    mask = np.asarray(sample.mask)
    if mask.ndim != 2:
        raise DimensionMismatchError("mask", f"expected (H, W), got shape {mask.shape}")
    h, w = mask.shape
    for name, arr in (("frame", frame), ("flow", flow)):
        if arr.shape != (3, h, w):
            raise DimensionMismatchError(
                name, f"expected shape (3, {h}, {w}) to match mask, got {arr.shape}"
            )
    for name, arr in (("frame", frame), ("flow", flow), ("mask", mask)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValueError(f"{name} contains non-finite values")
    for name, arr in (("frame", frame), ("flow", flow)):
        if arr.min() < 0 or arr.max() > 1:
            raise DimensionMismatchError(name, "values must lie in [0, 1]")
    if not np.all((mask == 0) | (mask == 1)):
        raise NonBinaryMaskError("mask must contain only 0 and 1")
    if not isinstance(sample.frame_index, (int, np.integer)) or sample.frame_index < 0:
        raise DimensionMismatchError("frame_index", "must be a nonnegative integer")
    return sample


@dataclass
class FeaturePyramid:
    """Ordered multi-level features, finest first. Levels are (B, C, H, W) tensors."""

    levels: list
    stream_tag: str
    stride_per_level: list

    def __post_init__(self):
        if self.stream_tag not in STREAM_TAGS:
            raise ConfigError(f"unknown stream tag {self.stream_tag!r}")
        if len(self.levels) < 2:
            raise DimensionMismatchError("levels", "a pyramid needs at least two levels")
        if len(self.stride_per_level) != len(self.levels):
            raise DimensionMismatchError("stride_per_level", "one stride per level required")
        for prev, cur in zip(self.levels, self.levels[1:]):
            if not (cur.shape[-2] < prev.shape[-2] and cur.shape[-1] < prev.shape[-1]):
                raise DimensionMismatchError("levels", "spatial size must strictly decrease")

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i):
        return self.levels[i]

    @property
    def channels(self):
        return [lvl.shape[1] for lvl in self.levels]

    @property
    def sizes(self):
        return [tuple(lvl.shape[-2:]) for lvl in self.levels]


@dataclass
class SaliencyMap:
    values: torch.Tensor  # (B, 1, H, W) or (H, W)
    stage: str = "final"

    def __post_init__(self):
        if self.stage not in SALIENCY_STAGES:
            raise ConfigError(f"unknown saliency stage {self.stage!r}")


@dataclass(frozen=True)
class RunConfig:
    # architecture
    num_levels: int = 4
    aligned_channels: int = 32
    gcn_depth: int = 2
    decode_iterations: int = 2
    level_strides: tuple = (4, 8, 16, 32)
    spatial_channels: tuple = (32, 64, 128, 256)
    temporal_channels: tuple = (16, 32, 64, 128)
    # ablation switches
    enable_lrm: bool = True
    enable_grm: bool = True
    enable_feedback: bool = True
    weighting_mode: str = "gcn"
    loss_mode: str = "combined"
    # loss
    bce_weight: float = 1.0
    iou_weight: float = 1.0
    focal_weight: float = 1.0
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    # optimisation
    learning_rate: float = 0.005
    momentum: float = 0.925
    weight_decay: float = 0.0005
    poly_power: float = 0.9
    epochs: int = 200
    batch_size: int = 4
    hflip: bool = True
    seed: int = 0
    # synthetic data
    image_size: int = 64
    num_sequences: int = 8
    frames_per_sequence: int = 8
    flow_range: float = 4.0
    max_speed: int = 3
    heldout_fraction: float = 0.2

    ARCHITECTURE_FIELDS = (
        "num_levels",
        "aligned_channels",
        "gcn_depth",
        "decode_iterations",
        "level_strides",
        "spatial_channels",
        "temporal_channels",
        "enable_lrm",
        "enable_grm",
        "enable_feedback",
        "weighting_mode",
    )

    def __post_init__(self):
        for name in ("level_strides", "spatial_channels", "temporal_channels"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        self.validate()

    def validate(self):
        if self.num_levels < 2:
            raise ConfigError("num_levels must be >= 2")
        if self.aligned_channels < 1:
            raise ConfigError("aligned_channels must be >= 1")
        if self.gcn_depth < 1:
            raise ConfigError("gcn_depth must be >= 1")
        if self.decode_iterations < 1:
            raise ConfigError("decode_iterations must be >= 1")
        for name in ("level_strides", "spatial_channels", "temporal_channels"):
            if len(getattr(self, name)) != self.num_levels:
                raise ConfigError(f"{name} must have num_levels={self.num_levels} entries")
        strides = self.level_strides
        if strides[0] < 1 or any(b % a or b <= a for a, b in zip(strides, strides[1:])):
            raise ConfigError("level_strides must be strictly increasing multiples")
        if not 0.0 < self.focal_alpha < 1.0:
            raise ConfigError("focal_alpha must lie in (0, 1)")
        if self.focal_gamma < 0:
            raise ConfigError("focal_gamma must be >= 0")
        if self.weighting_mode not in WEIGHTING_MODES:
            raise ConfigError(f"weighting_mode must be one of {WEIGHTING_MODES}")
        if self.loss_mode not in LOSS_MODES:
            raise ConfigError(f"loss_mode must be one of {LOSS_MODES}")
        if self.image_size % strides[-1]:
            raise ConfigError("image_size must be divisible by the coarsest stride")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if self.frames_per_sequence < 2:
            raise ConfigError("frames_per_sequence must be >= 2")
        if self.max_speed > self.flow_range:
            raise ConfigError("flow_range must cover max_speed")
        if not 0.0 < self.heldout_fraction < 1.0:
            raise ConfigError("heldout_fraction must lie in (0, 1)")

    @property
    def block_strides(self):
        s = self.level_strides
        return (s[0],) + tuple(b // a for a, b in zip(s, s[1:]))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for key, value in data.items():
            default = known[key].default
            if isinstance(default, bool):
                if not isinstance(value, bool):
                    raise ConfigError(f"{key} must be a boolean")
            elif isinstance(default, int):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{key} must be an integer")
            elif isinstance(default, float):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{key} must be a number")
                value = float(value)
            elif isinstance(default, tuple):
                if not isinstance(value, (list, tuple)):
                    raise ConfigError(f"{key} must be a list")
            elif isinstance(default, str) and not isinstance(value, str):
                raise ConfigError(f"{key} must be a string")
            kwargs[key] = value
        return cls(**kwargs)

    def architecture(self) -> dict:
        d = self.to_dict()
        return {k: d[k] for k in self.ARCHITECTURE_FIELDS}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps())


def load_config(path) -> RunConfig:
    """Read a flat JSON key-value config; absent keys take their defaults."""
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a flat key-value object")
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"config must be flat; {key!r} is nested")
    return RunConfig.from_dict(data)


def seed_everything(seed: int):
    """Seed all RNGs and pin torch to single-threaded deterministic kernels."""
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)


def derived_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a (seed, key...) stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def stack_samples(samples: Sequence[VideoSample]):
    """Batch samples into (frames, flows, masks) float tensors."""
    frames = torch.from_numpy(np.stack([s.frame for s in samples]))
    flows = torch.from_numpy(np.stack([s.flow for s in samples]))
    masks = torch.from_numpy(np.stack([s.mask for s in samples]))[:, None]
    return frames, flows, masks
