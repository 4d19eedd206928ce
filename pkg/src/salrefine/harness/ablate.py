"""Ablation ladder and weighting/feedback variants on a held-out split."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

from ..datamodel import RunConfig
from ..synth import load_dataset, split_sequences
from .evaluate import evaluate_samples
from .logs import kv
from .train import train_samples

log = logging.getLogger(__name__)

SWITCHES = ("loss_mode", "enable_lrm", "enable_grm", "weighting_mode", "enable_feedback")

# (name, switch overrides); the ladder first, then the weighting/feedback variants
VARIANTS = (
    ("bce_baseline", dict(loss_mode="bce", enable_lrm=False, enable_grm=False, enable_feedback=False)),
    ("combined_loss", dict(loss_mode="combined", enable_lrm=False, enable_grm=False, enable_feedback=False)),
    ("plus_lrm", dict(loss_mode="combined", enable_lrm=True, enable_grm=False, weighting_mode="gcn",
                      enable_feedback=True)),
    ("full", dict(loss_mode="combined", enable_lrm=True, enable_grm=True, weighting_mode="gcn",
                  enable_feedback=True)),
    ("gcn_no_feedback", dict(loss_mode="combined", enable_lrm=True, enable_grm=True, weighting_mode="gcn",
                             enable_feedback=False)),
    ("fc_feedback", dict(loss_mode="combined", enable_lrm=True, enable_grm=True, weighting_mode="fc",
                         enable_feedback=True)),
    ("feedback_only", dict(loss_mode="combined", enable_lrm=True, enable_grm=True, weighting_mode="none",
                           enable_feedback=True)),
)


@dataclass
class AblationRow:
    name: str
    loss_mode: str
    enable_lrm: bool
    enable_grm: bool
    weighting_mode: str
    enable_feedback: bool
    f_beta_max: float
    s_measure: float
    mae: float

    FIELDS = ("name",) + SWITCHES + ("f_beta_max", "s_measure", "mae")


def variant_configs(base: RunConfig):
    return [(name, base.replace(**changes)) for name, changes in VARIANTS]


def ablate_samples(base: RunConfig, samples, log_every=0):
    train, heldout = split_sequences(samples, base.heldout_fraction)
    log.info(kv(event="ablation_split", train_frames=len(train), heldout_frames=len(heldout)))
    rows = []
    for name, cfg in variant_configs(base):
        ckpt = train_samples(cfg, train, log_every=log_every)
        rep = evaluate_samples(ckpt, heldout)
        row = AblationRow(name, *(getattr(cfg, s) for s in SWITCHES), rep.f_beta_max, rep.s_measure, rep.mae)
        log.info(kv(event="ablation_row", name=name, f_beta_max=f"{row.f_beta_max:.6f}",
                    s_measure=f"{row.s_measure:.6f}", mae=f"{row.mae:.6f}"))
        rows.append(row)
    return rows


def write_rows(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(AblationRow.FIELDS)
        for r in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, f) for f in AblationRow.FIELDS)])
    return path


def ablate(base_config: RunConfig, dataset_root, report_dir=None, log_every=0):
    rows = ablate_samples(base_config, load_dataset(dataset_root), log_every=log_every)
    if report_dir is not None:
        write_rows(rows, Path(report_dir) / "ablation.csv")
    return rows
