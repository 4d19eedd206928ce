"""SGD training loop with the poly learning-rate policy."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import torch

from ..datamodel import RunConfig, seed_everything, stack_samples
from ..errors import DatasetError, NonFiniteLossError
from ..losses import combined_loss
from ..network import build_model
from ..synth import load_dataset
from .checkpoint import Checkpoint
from .logs import kv

log = logging.getLogger(__name__)


def poly_lr(base_lr, step, total_steps, power=0.9):
    if total_steps <= 0:
        return base_lr
    return base_lr * (1.0 - step / total_steps) ** power


def hflip_batch(frames, flows, masks):
    """Mirror horizontally; the x-displacement channel changes sign."""
    frames = frames.flip(-1)
    flows = flows.flip(-1).clone()
    flows[:, 0] = 1.0 - flows[:, 0]
    return frames, flows, masks.flip(-1)


def iterate_batches(samples, batch_size, generator, hflip=True):
    order = torch.randperm(len(samples), generator=generator).tolist()
    for i in range(0, len(order), batch_size):
        idx = order[i : i + batch_size]
        frames, flows, masks = stack_samples([samples[j] for j in idx])
        if hflip:
            flip = torch.rand(len(idx), generator=generator) < 0.5
            if flip.any():
                f2, fl2, m2 = hflip_batch(frames[flip], flows[flip], masks[flip])
                frames[flip], flows[flip], masks[flip] = f2, fl2, m2
        yield frames, flows, masks


def _dump_diagnostics(path, payload):
    if path is None:
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, default=str) + "\n")
    return path


def train_samples(config: RunConfig, samples, diagnostics_path=None, log_every=1) -> Checkpoint:
    """Train from scratch on in-memory samples; deterministic for a fixed seed."""
    if not samples:
        raise DatasetError("no training samples")
    seed_everything(config.seed)
    model = build_model(config)
    model.train()
    optimizer = torch.optim.SGD(
        model.parameters(),
        lr=config.learning_rate,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )
    generator = torch.Generator().manual_seed(config.seed)
    steps_per_epoch = math.ceil(len(samples) / config.batch_size)
    total = steps_per_epoch * config.epochs
    step = 0
    history = []
    for epoch in range(config.epochs):
        running, count = 0.0, 0
        lr = config.learning_rate
        for frames, flows, masks in iterate_batches(samples, config.batch_size, generator, config.hflip):
            lr = poly_lr(config.learning_rate, step, total, config.poly_power)
            for group in optimizer.param_groups:
                group["lr"] = lr
            maps = model(frames, flows)
            loss = combined_loss(maps, masks, config)
            value = loss.item()
            if not math.isfinite(value):
                dumped = _dump_diagnostics(
                    diagnostics_path,
                    {
                        "epoch": epoch,
                        "step": step,
                        "lr": lr,
                        "loss": value,
                        "components": [float(c.detach()) for c in loss.components],
                        "config": config.to_dict(),
                        "history": history,
                    },
                )
                raise NonFiniteLossError(f"loss became {value} at epoch {epoch} step {step}; dump={dumped}")
            optimizer.zero_grad()
            loss.total.backward()
            optimizer.step()
            running += value * len(frames)
            count += len(frames)
            step += 1
        history.append(running / count)
        if log_every and (epoch + 1) % log_every == 0:
            log.info(kv(event="epoch", epoch=epoch + 1, loss=f"{history[-1]:.6f}", lr=f"{lr:.6g}"))
    return Checkpoint(
        model_state={k: v.detach().clone() for k, v in model.state_dict().items()},
        optimizer_state=optimizer.state_dict(),
        config=config,
        epoch=config.epochs,
        seed=config.seed,
        loss_history=history,
    )


def train(config: RunConfig, dataset_root, out=None, log_every=1) -> Checkpoint:
    root = Path(dataset_root)
    if not (root / "manifest.json").exists():
        raise DatasetError(f"no dataset at {root}")
    samples = load_dataset(root)
    diag = Path(out).with_suffix(".diagnostics.json") if out else None
    ckpt = train_samples(config, samples, diagnostics_path=diag, log_every=log_every)
    if out is not None:
        ckpt.save(out)
        log.info(kv(event="checkpoint_saved", path=out, epochs=ckpt.epoch))
    return ckpt
