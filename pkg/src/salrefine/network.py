"""Full two-stream network: encoder followed by the refinement decoder."""

from __future__ import annotations

import contextlib

import torch.nn as nn

from .datamodel import RunConfig
from .encoder import TwoStreamEncoder
from .refinement import Decoder


class SaliencyNet(nn.Module):
    def __init__(self, config: RunConfig):
        super().__init__()
        self.config = config
        self.encoder = TwoStreamEncoder(config)
        self.decoder = Decoder(config)
        self.timer = None

    def set_timer(self, timer):
        self.timer = timer
        self.decoder.timer = timer

    def _section(self, name):
        return self.timer.section(name) if self.timer is not None else contextlib.nullcontext()

    def forward(self, frame, flow):
        """Per-iteration saliency maps at input resolution; the last is the final one."""
        with self._section("backbone"):
            s, t = self.encoder.backbone(frame, flow)
        with self._section("fusion"):
            s, t = self.encoder.fuse(s, t)
        return self.decoder(s.levels, t.levels, frame.shape[-2:])


def build_model(config: RunConfig) -> SaliencyNet:
    return SaliencyNet(config)
