"""Synthetic moving-shape videos with exact masks and analytic flow maps.

Each sequence has one moving (salient) shape and a few static distractors
drawn from the same colour distribution, so only motion tells them apart.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np

from .datamodel import RunConfig, VideoSample, derived_rng, validate_sample
from .errors import (
    ConfigError,
    CorruptImageError,
    DisplacementRangeError,
    MissingFileError,
    TrajectoryOutOfBoundsError,
    VersionMismatchError,
)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
SHAPE_KINDS = ("disc", "rectangle", "triangle")
TEXTURES = ("flat", "gradient", "noise")
FLOW_LEVELS = 65535


@dataclass(frozen=True)
class SequenceSpec:
    num_frames: int
    resolution: tuple  # (H, W)
    shape_kind: str
    trajectory: tuple  # per-frame integer (dx, dy); position t is start + sum of the first t
    start: tuple = (20, 20)  # (x, y) centre of the moving shape at frame 0
    size: int = 8
    background_texture: str = "flat"
    distractor_count: int = 0
    seed: int = 0
    flow_range: float = 4.0
    sequence_id: str = "seq000"

    def __post_init__(self):
        object.__setattr__(self, "trajectory", tuple((int(dx), int(dy)) for dx, dy in self.trajectory))
        object.__setattr__(self, "resolution", tuple(int(v) for v in self.resolution))
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))
        if self.num_frames < 2:
            raise ConfigError("num_frames must be >= 2")
        if len(self.trajectory) != self.num_frames:
            raise ConfigError("trajectory needs one displacement per frame")
        if self.shape_kind not in SHAPE_KINDS:
            raise ConfigError(f"shape_kind must be one of {SHAPE_KINDS}")
        if self.background_texture not in TEXTURES:
            raise ConfigError(f"background_texture must be one of {TEXTURES}")
        if self.size < 1 or self.distractor_count < 0:
            raise ConfigError("size must be >= 1 and distractor_count >= 0")

    def positions(self):
        x, y = self.start
        out = []
        for dx, dy in self.trajectory:
            out.append((x, y))
            x, y = x + dx, y + dy
        return out


@dataclass
class DatasetManifest:
    dataset_root: Path
    sequences: list = field(default_factory=list)  # dicts: sequence_id, num_frames, resolution
    flow_range: float = 4.0
    format_version: int = FORMAT_VERSION

    def to_json(self) -> dict:
        return {
            "format_version": self.format_version,
            "flow_range": self.flow_range,
            "sequences": [
                {
                    "sequence_id": s["sequence_id"],
                    "num_frames": s["num_frames"],
                    "resolution": list(s["resolution"]),
                }
                for s in self.sequences
            ],
        }


def shape_footprint(kind: str, centre, size: int, hw) -> np.ndarray:
    """Binary footprint sampled at pixel centres; integer shifts of ``centre`` shift it exactly."""
    h, w = hw
    cx, cy = centre
    yy, xx = np.mgrid[0:h, 0:w]
    dx = xx - cx
    dy = yy - cy
    if kind == "disc":
        inside = dx * dx + dy * dy <= size * size
    elif kind == "rectangle":
        inside = (np.abs(dx) <= size) & (np.abs(dy) <= max(1, (size * 2) // 3))
    elif kind == "triangle":
        # apex up, base at dy = +size; |dx| shrinks linearly towards the apex
        inside = (dy >= -size) & (dy <= size) & (2 * np.abs(dx) <= dy + size)
    else:
        raise ConfigError(f"unknown shape kind {kind!r}")
    return inside


def _extent(kind, size):
    if kind == "rectangle":
        return size, max(1, (size * 2) // 3)
    return size, size


def _check_inside(kind, centre, size, hw):
    h, w = hw
    ex, ey = _extent(kind, size)
    cx, cy = centre
    return cx - ex >= 0 and cx + ex <= w - 1 and cy - ey >= 0 and cy + ey <= h - 1


def _background(texture, hw, rng):
    h, w = hw
    base = rng.uniform(0.15, 0.85, size=3)
    if texture == "flat":
        img = np.broadcast_to(base[:, None, None], (3, h, w)).copy()
    elif texture == "gradient":
        other = rng.uniform(0.15, 0.85, size=3)
        angle = rng.uniform(0, 2 * np.pi)
        yy, xx = np.mgrid[0:h, 0:w]
        t = (np.cos(angle) * xx / max(w - 1, 1) + np.sin(angle) * yy / max(h - 1, 1))
        t = (t - t.min()) / max(t.max() - t.min(), 1e-12)
        img = base[:, None, None] * (1 - t) + other[:, None, None] * t
    else:
        noise = rng.uniform(-0.12, 0.12, size=(3, h, w))
        img = base[:, None, None] + noise
    return img


def _quantize8(img):
    return (np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0).astype(np.float32)


def quantize_flow(flow):
    """Snap to the 16-bit storage grid so disk round-trips are lossless."""
    return (np.round(np.clip(flow, 0.0, 1.0) * FLOW_LEVELS) / FLOW_LEVELS).astype(np.float32)


def render_flow(mask_t, displacement, flow_range: float) -> np.ndarray:
    """Encode a rigid displacement inside ``mask_t`` as a (3, H, W) flow image.

    Channels: dx and dy mapped linearly from [-R, R] to [0, 1], and the
    magnitude divided by R*sqrt(2). Outside the mask: zero motion (0.5, 0.5, 0).
    """
    dx, dy = displacement
    r = float(flow_range)
    if r <= 0:
        raise DisplacementRangeError("flow_range must be positive")
    if abs(dx) > r or abs(dy) > r:
        raise DisplacementRangeError(f"displacement ({dx}, {dy}) exceeds flow range {r}")
    m = np.asarray(mask_t).astype(bool)
    flow = np.empty((3,) + m.shape, dtype=np.float64)
    flow[0] = 0.5
    flow[1] = 0.5
    flow[2] = 0.0
    flow[0][m] = (dx + r) / (2 * r)
    flow[1][m] = (dy + r) / (2 * r)
    flow[2][m] = np.sqrt(dx * dx + dy * dy) / (r * np.sqrt(2.0))
    return flow


def decode_flow(flow, flow_range: float):
    """Per-pixel (dx, dy) recovered from an encoded flow map."""
    flow = np.asarray(flow, dtype=np.float64)
    r = float(flow_range)
    return (flow[0] * 2 - 1) * r, (flow[1] * 2 - 1) * r


def generate_sequence(spec: SequenceSpec) -> list:
    hw = spec.resolution
    positions = spec.positions()
    for t, pos in enumerate(positions):
        if not _check_inside(spec.shape_kind, pos, spec.size, hw):
            raise TrajectoryOutOfBoundsError(
                f"{spec.sequence_id}: shape leaves the frame at frame {t} (centre {pos})"
            )
    for dx, dy in spec.trajectory:
        if abs(dx) > spec.flow_range or abs(dy) > spec.flow_range:
            raise DisplacementRangeError(f"displacement ({dx}, {dy}) exceeds flow range {spec.flow_range}")

    rng = derived_rng(spec.seed, 0)
    background = _background(spec.background_texture, hw, rng)
    colour = rng.uniform(0.0, 1.0, size=3)
    canvas = background.copy()
    for _ in range(spec.distractor_count):
        kind = SHAPE_KINDS[int(rng.integers(len(SHAPE_KINDS)))]
        size = int(rng.integers(max(2, spec.size - 2), spec.size + 3))
        ex, ey = _extent(kind, size)
        cx = int(rng.integers(ex, hw[1] - ex))
        cy = int(rng.integers(ey, hw[0] - ey))
        fp = shape_footprint(kind, (cx, cy), size, hw)
        canvas[:, fp] = rng.uniform(0.0, 1.0, size=3)[:, None]

    samples = []
    for t, (pos, disp) in enumerate(zip(positions, spec.trajectory)):
        fp = shape_footprint(spec.shape_kind, pos, spec.size, hw)
        frame = canvas.copy()
        frame[:, fp] = colour[:, None]
        mask = fp.astype(np.float32)
        flow = quantize_flow(render_flow(fp, disp, spec.flow_range))
        samples.append(
            VideoSample(
                frame=_quantize8(frame),
                flow=flow,
                mask=mask,
                sequence_id=spec.sequence_id,
                frame_index=t,
            )
        )
    return samples


def random_sequence_spec(config: RunConfig, index: int, seed: int) -> SequenceSpec:
    rng = derived_rng(seed, 1, index)
    hw = (config.image_size, config.image_size)
    n = config.frames_per_sequence
    kind = SHAPE_KINDS[int(rng.integers(len(SHAPE_KINDS)))]
    lo = max(3, config.image_size // 10)
    hi = max(lo + 1, config.image_size // 6)
    size = int(rng.integers(lo, hi + 1))
    ex, ey = _extent(kind, size)
    span_x = hw[1] - 1 - 2 * ex
    span_y = hw[0] - 1 - 2 * ey
    max_vx = min(config.max_speed, span_x // (n - 1))
    max_vy = min(config.max_speed, span_y // (n - 1))
    while True:
        vx = int(rng.integers(-max_vx, max_vx + 1))
        vy = int(rng.integers(-max_vy, max_vy + 1))
        if vx or vy:
            break
    # start so that every visible position stays inside
    x_lo = ex - min(0, vx * (n - 1))
    x_hi = hw[1] - 1 - ex - max(0, vx * (n - 1))
    y_lo = ey - min(0, vy * (n - 1))
    y_hi = hw[0] - 1 - ey - max(0, vy * (n - 1))
    start = (int(rng.integers(x_lo, x_hi + 1)), int(rng.integers(y_lo, y_hi + 1)))
    return SequenceSpec(
        num_frames=n,
        resolution=hw,
        shape_kind=kind,
        trajectory=tuple((vx, vy) for _ in range(n)),
        start=start,
        size=size,
        background_texture=TEXTURES[int(rng.integers(len(TEXTURES)))],
        distractor_count=int(rng.integers(1, 3)),
        seed=int(rng.integers(2**31)),
        flow_range=config.flow_range,
        sequence_id=f"seq{index:03d}",
    )


def generate_dataset(config: RunConfig, seed: int | None = None) -> list:
    seed = config.seed if seed is None else seed
    samples = []
    for i in range(config.num_sequences):
        samples.extend(generate_sequence(random_sequence_spec(config, i, seed)))
    return samples


def group_by_sequence(samples: Sequence[VideoSample]) -> dict:
    groups = {}
    for s in samples:
        groups.setdefault(s.sequence_id, []).append(s)
    return groups


def is_heldout(sequence_id: str, fraction: float = 0.2) -> bool:
    """Stable hash split of sequence ids."""
    h = int.from_bytes(hashlib.sha256(sequence_id.encode()).digest()[:8], "big")
    return (h % 10_000) < fraction * 10_000


def split_sequences(samples, fraction: float = 0.2):
    """(train, heldout) by sequence-id hash; never empty when two or more sequences exist."""
    groups = group_by_sequence(samples)
    ids = sorted(groups)
    held = [i for i in ids if is_heldout(i, fraction)]
    if len(ids) >= 2 and not held:
        held = [min(ids, key=lambda i: hashlib.sha256(i.encode()).hexdigest())]
    if len(held) == len(ids) and len(ids) >= 2:
        held = held[:-1]
    train = [s for i in ids if i not in held for s in groups[i]]
    test = [s for i in held for s in groups[i]]
    return train, test


# ---------------------------------------------------------------------------
# on-disk format


def _frame_name(i):
    return f"{i:05d}.png"


def _write_png(path, img):
    if not cv2.imwrite(str(path), img):
        raise OSError(f"failed to write {path}")


def write_dataset(samples: Sequence[VideoSample], root, flow_range: float = 4.0) -> DatasetManifest:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(dataset_root=root, flow_range=float(flow_range))
    for seq_id, frames in group_by_sequence(samples).items():
        base = root / seq_id
        for sub in ("frames", "flow", "masks"):
            (base / sub).mkdir(parents=True, exist_ok=True)
        for s in frames:
            validate_sample(s)
            name = _frame_name(s.frame_index)
            rgb = np.round(s.frame * 255.0).astype(np.uint8).transpose(1, 2, 0)
            _write_png(base / "frames" / name, rgb[:, :, ::-1])
            flow = np.round(s.flow.astype(np.float64) * FLOW_LEVELS).astype(np.uint16).transpose(1, 2, 0)
            _write_png(base / "flow" / name, flow[:, :, ::-1])
            _write_png(base / "masks" / name, (s.mask * 255).astype(np.uint8))
        manifest.sequences.append(
            {"sequence_id": seq_id, "num_frames": len(frames), "resolution": tuple(frames[0].size)}
        )
    (root / "manifest.json").write_text(json.dumps(manifest.to_json(), indent=2) + "\n")
    return manifest


def load_manifest(root) -> DatasetManifest:
    root = Path(root)
    path = root / "manifest.json"
    if not path.exists():
        raise MissingFileError(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CorruptImageError(f"manifest is not valid JSON: {exc}") from exc
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"dataset format_version {version} != supported {FORMAT_VERSION}")
    seqs = [
        {"sequence_id": s["sequence_id"], "num_frames": int(s["num_frames"]), "resolution": tuple(s["resolution"])}
        for s in data["sequences"]
    ]
    return DatasetManifest(dataset_root=root, sequences=seqs, flow_range=float(data["flow_range"]),
                           format_version=version)


def _read_png(path, flags, dtype):
    if not path.exists():
        raise MissingFileError(path)
    img = cv2.imread(str(path), flags)
    if img is None:
        raise CorruptImageError(f"cannot decode image {path}")
    if img.dtype != dtype:
        raise CorruptImageError(f"{path}: expected {np.dtype(dtype).name} pixels, got {img.dtype}")
    return img


def load_dataset(root) -> list:
    manifest = load_manifest(root)
    root = manifest.dataset_root
    samples = []
    for entry in manifest.sequences:
        seq_id = entry["sequence_id"]
        h, w = entry["resolution"]
        for i in range(entry["num_frames"]):
            name = _frame_name(i)
            rgb = _read_png(root / seq_id / "frames" / name, cv2.IMREAD_COLOR, np.uint8)
            flow = _read_png(root / seq_id / "flow" / name, cv2.IMREAD_UNCHANGED, np.uint16)
            mask = _read_png(root / seq_id / "masks" / name, cv2.IMREAD_GRAYSCALE, np.uint8)
            if flow.ndim != 3 or flow.shape[2] != 3:
                raise CorruptImageError(f"{root / seq_id / 'flow' / name}: expected 3 channels")
            if rgb.shape[:2] != (h, w) or flow.shape[:2] != (h, w) or mask.shape != (h, w):
                raise CorruptImageError(f"{seq_id}/{name}: size disagrees with manifest")
            if not np.all((mask == 0) | (mask == 255)):
                raise CorruptImageError(f"{seq_id}/masks/{name}: mask values must be 0 or 255")
            sample = VideoSample(
                frame=(rgb[:, :, ::-1].transpose(2, 0, 1).astype(np.float64) / 255.0).astype(np.float32),
                flow=(flow[:, :, ::-1].transpose(2, 0, 1).astype(np.float64) / FLOW_LEVELS).astype(np.float32),
                mask=(mask // 255).astype(np.float32),
                sequence_id=seq_id,
                frame_index=i,
            )
            samples.append(validate_sample(sample))
    return samples
