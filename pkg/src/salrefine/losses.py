"""BCE, IoU and focal losses on probability maps, plus their combination."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .datamodel import SaliencyMap
from .errors import EmptyInputError, ShapeMismatchError

EPS = 1e-7
IOU_DELTA = 1e-7


@dataclass
class LossValue:
    total: torch.Tensor
    bce: torch.Tensor
    iou: torch.Tensor
    focal: torch.Tensor
    reduction: str = "mean"

    @property
    def components(self):
        return (self.bce, self.iou, self.focal)

    def item(self):
        return float(self.total.detach())


def _check(s, gt):
    if s.shape != gt.shape:
        raise ShapeMismatchError(f"prediction {tuple(s.shape)} vs ground truth {tuple(gt.shape)}")


def _reduce_dims(s):
    # per-image reduction over everything but a leading batch dimension
    return tuple(range(1, s.dim())) if s.dim() > 2 else tuple(range(s.dim()))


def bce_loss(s, gt):
    _check(s, gt)
    s = s.clamp(EPS, 1 - EPS)
    return -(gt * torch.log(s) + (1 - gt) * torch.log(1 - s)).mean()


def iou_loss(s, gt):
    """1 - soft IoU, averaged over images; an empty ground truth scores sum(s)/(sum(s) + N*delta)."""
    _check(s, gt)
    dims = _reduce_dims(s)
    inter = (s * gt).sum(dims)
    union = (s + gt - s * gt).sum(dims)
    fg = gt.sum(dims)
    n = gt[0].numel() if s.dim() > 2 else gt.numel()
    coverage = s.sum(dims)
    empty = coverage / (coverage + n * IOU_DELTA)
    safe_union = torch.where(fg > 0, union, torch.ones_like(union))
    per_image = torch.where(fg > 0, 1 - inter / safe_union, empty)
    return per_image.mean()


def focal_loss(s, gt, alpha=0.25, gamma=2.0):
    """Foreground pixels cost -alpha (1-s)^gamma log s, background -(1-alpha) s^gamma log(1-s)."""
    _check(s, gt)
    s = s.clamp(EPS, 1 - EPS)
    fg = -alpha * (1 - s) ** gamma * torch.log(s)
    bg = -(1 - alpha) * s**gamma * torch.log(1 - s)
    return (gt * fg + (1 - gt) * bg).mean()


def single_map_loss(s, gt, config) -> LossValue:
    bce = bce_loss(s, gt)
    if config.loss_mode == "bce":
        zero = torch.zeros((), dtype=s.dtype, device=s.device)
        return LossValue(bce, bce, zero, zero)
    iou = iou_loss(s, gt)
    foc = focal_loss(s, gt, config.focal_alpha, config.focal_gamma)
    total = config.bce_weight * bce + config.iou_weight * iou + config.focal_weight * foc
    return LossValue(total, bce, iou, foc)


def combined_loss(maps, gt, config) -> LossValue:
    """Equal-weight mean of the per-map loss over every supervised map."""
    if len(maps) == 0:
        raise EmptyInputError("combined_loss needs at least one map")
    parts = [single_map_loss(m.values if isinstance(m, SaliencyMap) else m, gt, config) for m in maps]
    k = len(parts)
    return LossValue(
        total=sum(p.total for p in parts) / k,
        bce=sum(p.bce for p in parts) / k,
        iou=sum(p.iou for p in parts) / k,
        focal=sum(p.focal for p in parts) / k,
    )


