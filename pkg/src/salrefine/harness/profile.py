"""Per-component inference timing."""

from __future__ import annotations

import contextlib
import time
from collections import defaultdict

import torch

from ..datamodel import stack_samples
from ..synth import generate_dataset

COMPONENTS = ("backbone", "fusion", "lrm", "grm", "head")


class Timer:
    def __init__(self):
        self.totals = defaultdict(float)

    @contextlib.contextmanager
    def section(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.totals[name] += time.perf_counter() - start


@torch.no_grad()
def profile_model(model, samples, warmup=2):
    model.eval()
    for s in samples[:warmup]:
        frames, flows, _ = stack_samples([s])
        model(frames, flows)
    timer = Timer()
    model.set_timer(timer)
    try:
        for s in samples:
            frames, flows, _ = stack_samples([s])
            model(frames, flows)
    finally:
        model.set_timer(None)
    n = len(samples)
    per_frame = {c: timer.totals.get(c, 0.0) / n for c in COMPONENTS}
    total = sum(per_frame.values())
    shares = {c: (v / total if total > 0 else 0.0) for c, v in per_frame.items()}
    return {"frames": n, "seconds_per_frame": per_frame, "shares": shares, "total_seconds_per_frame": total}


def profile(checkpoint, n_frames=32, samples=None):
    from .checkpoint import Checkpoint

    if not isinstance(checkpoint, Checkpoint):
        checkpoint = Checkpoint.load(checkpoint)
    model = checkpoint.build_model()
    if samples is None:
        cfg = checkpoint.config
        per_seq = cfg.frames_per_sequence
        cfg = cfg.replace(num_sequences=max(1, -(-n_frames // per_seq)))
        samples = generate_dataset(cfg, seed=cfg.seed)
    return profile_model(model, list(samples)[:n_frames])
