"""Checkpoint container and (de)serialisation."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..datamodel import RunConfig
from ..errors import ArchitectureMismatchError, MissingFileError, VersionMismatchError
from ..network import build_model

CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    model_state: dict
    optimizer_state: dict
    config: RunConfig
    epoch: int
    seed: int
    loss_history: list = field(default_factory=list)
    format_version: int = CHECKPOINT_VERSION

    def build_model(self, config: RunConfig | None = None):
        if config is not None and config.architecture() != self.config.architecture():
            diff = sorted(
                k for k, v in config.architecture().items() if self.config.architecture()[k] != v
            )
            raise ArchitectureMismatchError(f"config disagrees with checkpoint on: {', '.join(diff)}")
        model = build_model(self.config)
        try:
            model.load_state_dict(self.model_state, strict=True)
        except RuntimeError as exc:
            raise ArchitectureMismatchError(str(exc).splitlines()[0]) from exc
        model.eval()
        return model

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {
                "format_version": self.format_version,
                "config": self.config.to_dict(),
                "model_state": self.model_state,
                "optimizer_state": self.optimizer_state,
                "epoch": self.epoch,
                "seed": self.seed,
                "loss_history": list(self.loss_history),
            },
            path,
        )
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        if not path.exists():
            raise MissingFileError(path)
        data = torch.load(path, map_location="cpu", weights_only=True)
        if data.get("format_version") != CHECKPOINT_VERSION:
            raise VersionMismatchError(
                f"checkpoint format_version {data.get('format_version')} != {CHECKPOINT_VERSION}"
            )
        return cls(
            model_state=data["model_state"],
            optimizer_state=data["optimizer_state"],
            config=RunConfig.from_dict(data["config"]),
            epoch=int(data["epoch"]),
            seed=int(data["seed"]),
            loss_history=[float(v) for v in data["loss_history"]],
            format_version=data["format_version"],
        )
