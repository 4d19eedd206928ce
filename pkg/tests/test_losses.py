import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from salrefine.datamodel import RunConfig
from salrefine.errors import EmptyInputError, ShapeMismatchError
from salrefine.losses import EPS, bce_loss, combined_loss, focal_loss, iou_loss

from oracles import analytic_vs_numeric


def mask(n=8, seed=0):
    g = torch.Generator().manual_seed(seed)
    return (torch.rand(n, n, generator=g, dtype=torch.float64) > 0.5).double()


def test_bce_perfect():
    gt = mask()
    assert bce_loss(gt.clone(), gt).item() <= -math.log(1 - EPS) + 1e-12


def test_bce_uniform_half():
    assert bce_loss(torch.full((8, 8), 0.5, dtype=torch.float64), mask()).item() == pytest.approx(math.log(2), abs=1e-12)


def test_bce_fully_wrong():
    gt = mask()
    value = bce_loss(1 - gt, gt).item()
    assert value == pytest.approx(-math.log(EPS), rel=1e-9)
    assert value == pytest.approx(16.118, abs=1e-3)


def test_iou_cases():
    gt = mask()
    assert iou_loss(gt.clone(), gt).item() == 0.0
    ones = torch.ones(4, 4, dtype=torch.float64)
    assert iou_loss(torch.full((4, 4), 0.5, dtype=torch.float64), ones).item() == pytest.approx(0.5)
    assert iou_loss(torch.zeros(4, 4, dtype=torch.float64), ones).item() == 1.0


def test_iou_empty_ground_truth():
    zeros = torch.zeros(4, 4, dtype=torch.float64)
    assert iou_loss(zeros, zeros).item() == 0.0
    assert 0 < iou_loss(torch.full((4, 4), 0.3, dtype=torch.float64), zeros).item() <= 1


def test_focal_single_pixel():
    s = torch.tensor([[0.5]], dtype=torch.float64)
    g = torch.tensor([[1.0]], dtype=torch.float64)
    expected = 0.25 * 0.25 * math.log(2)
    assert expected == pytest.approx(0.04332, abs=1e-5)
    assert focal_loss(s, g, 0.25, 2.0).item() == pytest.approx(expected, abs=1e-15)


def test_focal_perfect():
    gt = mask()
    assert focal_loss(gt.clone(), gt).item() < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_focal_reduces_to_half_bce(seed):
    g = torch.Generator().manual_seed(seed)
    s = torch.rand(6, 6, generator=g, dtype=torch.float64)
    gt = (torch.rand(6, 6, generator=g, dtype=torch.float64) > 0.5).double()
    assert focal_loss(s, gt, 0.5, 0.0).item() == pytest.approx(0.5 * bce_loss(s, gt).item(), abs=1e-12)


def test_shape_mismatch():
    for fn in (bce_loss, iou_loss, focal_loss):
        with pytest.raises(ShapeMismatchError):
            fn(torch.rand(4, 4), torch.rand(4, 5))


def test_combined_modes():
    cfg = RunConfig()
    gt = mask()
    perfect = combined_loss([gt.clone()], gt, cfg)
    assert perfect.item() <= 1e-6
    s = torch.rand(8, 8, dtype=torch.float64)
    bce_only = combined_loss([s], gt, cfg.replace(loss_mode="bce"))
    assert bce_only.total.item() == bce_only.bce.item() == bce_loss(s, gt).item()
    full = combined_loss([s], gt, cfg)
    assert full.total.item() == pytest.approx(sum(c.item() for c in full.components), abs=1e-15)
    assert combined_loss([s, s], gt, cfg).total.item() == pytest.approx(full.total.item(), abs=1e-15)
    with pytest.raises(EmptyInputError):
        combined_loss([], gt, cfg)


def test_losses_nonnegative_finite():
    cfg = RunConfig()
    for seed in range(20):
        g = torch.Generator().manual_seed(seed)
        s = torch.rand(2, 1, 5, 5, generator=g, dtype=torch.float64)
        s[0, 0, 0, 0] = 0.0
        s[1, 0, 0, 0] = 1.0
        gt = (torch.rand(2, 1, 5, 5, generator=g, dtype=torch.float64) > 0.5).double()
        v = combined_loss([s], gt, cfg)
        for c in (v.total,) + v.components:
            assert torch.isfinite(c) and c.item() >= 0


@pytest.mark.parametrize("fn", [bce_loss, iou_loss, lambda s, g: focal_loss(s, g, 0.25, 2.0)])
def test_loss_gradients(fn):
    g = torch.Generator().manual_seed(1)
    s = (0.05 + 0.9 * torch.rand(4, 4, generator=g, dtype=torch.float64)).requires_grad_()
    gt = (torch.rand(4, 4, generator=g, dtype=torch.float64) > 0.5).double()
    assert analytic_vs_numeric(lambda: fn(s, gt), [s]) < 1e-4
