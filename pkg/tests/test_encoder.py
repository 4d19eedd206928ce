import pytest
import torch
import torch.nn as nn

from salrefine.datamodel import FeaturePyramid, RunConfig
from salrefine.encoder import (
    Backbone,
    BackboneConfig,
    ChannelAlign,
    FusionUnit,
    TwoStreamEncoder,
    extract_features,
    fuse_adjacent,
)
from salrefine.errors import ChannelMismatchError, IndivisibleResolutionError

from oracles import analytic_vs_numeric


def spatial_backbone():
    return Backbone(BackboneConfig((16, 32, 64, 128), (4, 2, 2, 2), "spatial"))


def test_pyramid_shapes():
    pyr = extract_features(torch.rand(3, 64, 64), spatial_backbone())
    assert pyr.sizes == [(16, 16), (8, 8), (4, 4), (2, 2)]
    assert pyr.channels == [16, 32, 64, 128]
    assert pyr.stride_per_level == [4, 8, 16, 32]


def test_zero_input_finite():
    bb = spatial_backbone()
    for p in bb.blocks[-1].parameters():
        nn.init.zeros_(p)
    pyr = extract_features(torch.zeros(3, 64, 64), bb.eval())
    assert all(torch.isfinite(l).all() for l in pyr.levels)


def test_indivisible_resolution():
    with pytest.raises(IndivisibleResolutionError):
        extract_features(torch.rand(3, 60, 60), spatial_backbone())


def test_channel_align_contract():
    levels = [torch.randn(2, c, s, s) for c, s in zip((16, 32, 64, 128), (16, 8, 4, 2))]
    pyr = FeaturePyramid(levels, "spatial", [4, 8, 16, 32])
    out = ChannelAlign((16, 32, 64, 128), 32)(pyr)
    assert out.channels == [32] * 4
    assert out.sizes == pyr.sizes
    assert min(l.min().item() for l in out.levels) >= 0


def test_fusion_zero_input_is_identity():
    unit = FusionUnit(4).eval()
    for p in unit.correction.parameters():
        p.data.normal_()
    a = torch.zeros(1, 4, 8, 8)
    b = torch.rand(1, 4, 16, 16)
    c = torch.rand(1, 4, 8, 8)
    # the correction (conv -> BN -> ReLU) can still respond to P = 0 through the BN shift
    nn.init.zeros_(unit.correction[1].bias)
    unit.correction[1].running_mean.zero_()
    out = unit(a, b, c)
    for x, y in zip(out, (a, b, c)):
        assert torch.equal(x, y)


def test_fresh_fusion_is_identity():
    unit = FusionUnit(4)
    xs = (torch.rand(2, 4, 8, 8), torch.rand(2, 4, 16, 16), torch.rand(2, 4, 8, 8))
    for x, y in zip(unit(*xs), xs):
        assert torch.equal(x, y)


def test_fusion_shapes():
    unit = FusionUnit(32)
    out = unit(torch.rand(1, 32, 8, 8), torch.rand(1, 32, 16, 16), torch.rand(1, 32, 8, 8))
    assert [tuple(o.shape[1:]) for o in out] == [(32, 8, 8), (32, 16, 16), (32, 8, 8)]


def test_fusion_identity_correction_hand_value():
    out = fuse_adjacent(
        torch.full((1, 1, 1, 1), 2.0), torch.full((1, 1, 1, 1), 3.0), torch.full((1, 1, 1, 1), 4.0), nn.Identity()
    )
    assert [o.item() for o in out] == [26.0, 27.0, 28.0]


def test_fusion_channel_mismatch():
    with pytest.raises(ChannelMismatchError):
        fuse_adjacent(torch.rand(1, 4, 4, 4), torch.rand(1, 3, 8, 8), torch.rand(1, 4, 4, 4), nn.Identity())


def test_fusion_gradient_check():
    torch.manual_seed(1)
    unit = FusionUnit(2).double().eval()
    with torch.no_grad():
        unit.correction[1].weight.fill_(0.7)
        unit.correction[1].bias.fill_(0.2)
    xs = [
        torch.rand(1, 2, 2, 2, dtype=torch.float64, requires_grad=True),
        torch.rand(1, 2, 4, 4, dtype=torch.float64, requires_grad=True),
        torch.rand(1, 2, 2, 2, dtype=torch.float64, requires_grad=True),
    ]
    weights = [torch.randn(o.shape, dtype=torch.float64) for o in unit(*xs)]

    def loss():
        return sum((o * w).sum() for o, w in zip(unit(*xs), weights))

    assert analytic_vs_numeric(loss, xs + [unit.correction[0].weight]) < 1e-4


def test_encoder_fusion_order_is_bottom_up():
    cfg = RunConfig(num_levels=3, aligned_channels=4, level_strides=(2, 4, 8), spatial_channels=(4, 4, 4),
                    temporal_channels=(4, 4, 4), image_size=32)
    enc = TwoStreamEncoder(cfg).eval()
    calls = []
    for i, unit in enumerate(enc.fusions):
        unit.register_forward_hook(lambda m, inp, out, i=i: calls.append((i, inp[0].shape[-1])))
    fused_s, fused_t = enc(torch.rand(1, 3, 32, 32), torch.rand(1, 3, 32, 32))
    assert [c[0] for c in calls] == [0, 1]
    assert fused_s.sizes == [(16, 16), (8, 8), (4, 4)]
    assert fused_t.channels == [4, 4, 4]
