"""Inference and metric reporting."""

from __future__ import annotations

import logging
from pathlib import Path

import torch

from ..datamodel import stack_samples
from ..errors import DatasetError
from ..metrics import MetricsAccumulator, MetricsReport
from ..synth import load_dataset
from .checkpoint import Checkpoint
from .logs import kv

log = logging.getLogger(__name__)


@torch.no_grad()
def predict(model, samples, batch_size=8):
    """Final-iteration saliency maps, one (H, W) array per sample."""
    model.eval()
    out = []
    for i in range(0, len(samples), batch_size):
        frames, flows, _ = stack_samples(samples[i : i + batch_size])
        maps = model(frames, flows)
        out.extend(m[0].numpy() for m in maps[-1])
    return out


def evaluate_predictions(predictions, samples) -> MetricsReport:
    if len(predictions) != len(samples):
        raise ValueError("one prediction per sample required")
    if not samples:
        raise DatasetError("nothing to evaluate")
    acc = MetricsAccumulator()
    for pred, sample in zip(predictions, samples):
        acc.add(sample.sequence_id, pred, sample.mask)
    return acc.report()


def evaluate_samples(checkpoint: Checkpoint, samples, config=None) -> MetricsReport:
    model = checkpoint.build_model(config)
    return evaluate_predictions(predict(model, samples), samples)


def evaluate(checkpoint, dataset_root, report_dir=None, config=None) -> MetricsReport:
    if not isinstance(checkpoint, Checkpoint):
        checkpoint = Checkpoint.load(checkpoint)
    samples = load_dataset(dataset_root)
    report = evaluate_samples(checkpoint, samples, config)
    if report_dir is not None:
        report.write(report_dir)
        log.info(kv(event="report_written", dir=Path(report_dir)))
    log.info(
        kv(event="evaluation", f_beta_max=f"{report.f_beta_max:.6f}", s_measure=f"{report.s_measure:.6f}",
           mae=f"{report.mae:.6f}", frames=len(samples))
    )
    return report
