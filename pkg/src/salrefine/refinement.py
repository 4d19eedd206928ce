"""Decoder: local refinement blocks, global refinement, feedback and the prediction head."""

from __future__ import annotations

import contextlib

import torch
import torch.nn as nn
import torch.nn.functional as F

from .datamodel import SaliencyMap
from .encoder import resize
from .errors import ChannelMismatchError, EmptyInputError
from .graph import AdaptiveWeighting


def _check_channels(features, c0):
    for f in features:
        if f.shape[1] != c0:
            raise ChannelMismatchError(f"expected {c0} channels, got {f.shape[1]}")


def _scale(weights, i, f):
    return weights[:, i].reshape(-1, 1, 1, 1) * f


class LocalRefinementBlock(nn.Module):
    """Refines (f_s_l, f_s_{l-1}, f_t_l[, f_b]) at the finer level's resolution."""

    def __init__(self, c0, gcn_depth=2, weighting_mode="gcn", use_feedback=True):
        super().__init__()
        self.c0 = c0
        self.use_feedback = use_feedback
        n = 4 if use_feedback else 3
        self.weighting = AdaptiveWeighting(c0, gcn_depth, weighting_mode)
        self.merge = nn.Conv2d(n * c0, c0, 1)

    def forward(self, f_s_l, f_s_lm1, f_t_l, f_b=None):
        features = [f_s_l, f_s_lm1, f_t_l]
        if self.use_feedback:
            if f_b is None:
                f_b = torch.zeros_like(f_s_lm1)
            features.append(f_b)
        _check_channels(features, self.c0)
        r = self.weighting(features)
        fine = f_s_lm1.shape[-2:]
        weighted = [_scale(r, i, resize(f, fine)) for i, f in enumerate(features)]
        return self.merge(torch.cat(weighted, dim=1))


class PlainMerge(nn.Module):
    """Concatenate-and-convolve stand-in used when local refinement is switched off."""

    def __init__(self, c0):
        super().__init__()
        self.c0 = c0
        self.merge = nn.Conv2d(3 * c0, c0, 1)

    def forward(self, f_s_l, f_s_lm1, f_t_l, f_b=None):
        _check_channels([f_s_l, f_s_lm1, f_t_l], self.c0)
        fine = f_s_lm1.shape[-2:]
        return self.merge(torch.cat([resize(f_s_l, fine), f_s_lm1, resize(f_t_l, fine)], dim=1))


class GlobalRefinementModule(nn.Module):
    """One graph over every local output plus the feedback features."""

    def __init__(self, c0, num_levels, gcn_depth=2, weighting_mode="gcn", use_feedback=True):
        super().__init__()
        self.c0 = c0
        self.use_feedback = use_feedback
        self.weighting = AdaptiveWeighting(c0, gcn_depth, weighting_mode)
        cin = 2 * c0 if use_feedback else c0
        self.merges = nn.ModuleList(nn.Conv2d(cin, c0, 1) for _ in range(num_levels))

    def forward(self, locals_, f_b=None):
        if len(locals_) == 0:
            raise EmptyInputError("global refinement needs at least one level")
        if len(locals_) != len(self.merges):
            raise ChannelMismatchError(f"expected {len(self.merges)} levels, got {len(locals_)}")
        features = list(locals_)
        if self.use_feedback:
            if f_b is None:
                f_b = torch.zeros_like(locals_[0])
            features.append(f_b)
        _check_channels(features, self.c0)
        r = self.weighting(features)
        out = []
        for i, (f, merge) in enumerate(zip(locals_, self.merges)):
            x = torch.cat([f, resize(f_b, f.shape[-2:])], dim=1) if self.use_feedback else f
            out.append(merge(_scale(r, i, x)))
        return out


class SaliencyHead(nn.Module):
    """Top-down accumulation, 3x3 conv to one channel, sigmoid, upsample."""

    def __init__(self, c0):
        super().__init__()
        self.conv = nn.Conv2d(c0, 1, 3, padding=1)

    def forward(self, globals_, out_size):
        if len(globals_) == 0:
            raise EmptyInputError("prediction head needs at least one feature map")
        order = sorted(globals_, key=lambda g: g.shape[-1] * g.shape[-2])
        x = order[0]
        for g in order[1:]:
            x = resize(x, g.shape[-2:]) + g
        return resize(torch.sigmoid(self.conv(x)), out_size)


class FeedbackEmbedding(nn.Module):
    """3x3 conv embedding of a predicted map into ``c0`` feature channels."""

    def __init__(self, c0):
        super().__init__()
        self.conv = nn.Conv2d(1, c0, 3, padding=1)

    def forward(self, saliency, size):
        if tuple(saliency.shape[-2:]) != tuple(size):
            saliency = F.interpolate(saliency, size=tuple(size), mode="area")
        return self.conv(saliency)


class Decoder(nn.Module):
    def __init__(self, config):
        super().__init__()
        c0 = config.aligned_channels
        n = config.num_levels - 1
        self.iterations = config.decode_iterations
        self.c0 = c0
        self.enable_lrm = config.enable_lrm
        self.enable_grm = config.enable_grm
        # feedback only exists when a refinement unit consumes it
        self.use_feedback = config.enable_feedback and (config.enable_lrm or config.enable_grm)
        if self.enable_lrm:
            self.locals = nn.ModuleList(
                LocalRefinementBlock(c0, config.gcn_depth, config.weighting_mode, self.use_feedback)
                for _ in range(n)
            )
        else:
            self.locals = nn.ModuleList(PlainMerge(c0) for _ in range(n))
        if self.enable_grm:
            self.grm = GlobalRefinementModule(c0, n, config.gcn_depth, config.weighting_mode, self.use_feedback)
        self.head = SaliencyHead(c0)
        if self.use_feedback:
            self.feedback = FeedbackEmbedding(c0)
        self.timer = None

    def _section(self, name):
        return self.timer.section(name) if self.timer is not None else contextlib.nullcontext()

    def step(self, s_levels, t_levels, out_size, f_b=None):
        with self._section("lrm"):
            locals_ = [
                unit(s_levels[l], s_levels[l - 1], t_levels[l], f_b)
                for l, unit in enumerate(self.locals, start=1)
            ]
        if self.enable_grm:
            with self._section("grm"):
                globals_ = self.grm(locals_, f_b)
        else:
            globals_ = locals_
        with self._section("head"):
            return self.head(globals_, out_size)

    def forward(self, s_levels, t_levels, out_size, iterations=None):
        """Returns the list of per-iteration maps; the last one is the final prediction."""
        iterations = self.iterations if iterations is None else iterations
        if not self.use_feedback:
            # no cross-iteration dependency: every iteration computes the same map
            s = self.step(s_levels, t_levels, out_size)
            return [s] * iterations
        finest = s_levels[0].shape[-2:]
        f_b = s_levels[0].new_zeros((s_levels[0].shape[0], self.c0) + tuple(finest))
        maps = []
        for t in range(iterations):
            s = self.step(s_levels, t_levels, out_size, f_b)
            maps.append(s)
            if t + 1 < iterations:
                with self._section("head"):
                    f_b = self.feedback(s, finest)
        return maps


def decode(decoder: Decoder, s_levels, t_levels, out_size, iterations=None):
    """Run the decoder and wrap the results as (final, intermediates) saliency maps."""
    maps = decoder(s_levels, t_levels, out_size, iterations)
    intermediates = [SaliencyMap(m, "intermediate") for m in maps[:-1]]
    return SaliencyMap(maps[-1], "final"), intermediates


def predict_saliency(globals_, head: SaliencyHead, out_size):
    return SaliencyMap(head(globals_, out_size), "final")
