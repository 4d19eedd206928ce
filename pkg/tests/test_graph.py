import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from salrefine.errors import DimensionMismatchError, EmptyInputError, ZeroNormAttributeError
from salrefine.graph import (
    GCN,
    AdaptiveWeighting,
    FeatureGraph,
    NodeAttributes,
    WeightHead,
    build_adjacency,
    gcn_forward,
    node_attributes,
    weight_head,
)

from oracles import analytic_vs_numeric


def identity_attributes(c):
    mod = NodeAttributes(c)
    with torch.no_grad():
        mod.conv.weight.zero_()
        mod.conv.bias.zero_()
        for i in range(c):
            mod.conv.weight[i, i, 1, 1] = 1.0
    return mod


def test_attribute_of_constant_map():
    mod = identity_attributes(3)
    V = node_attributes([torch.full((1, 3, 5, 5), 1.5), torch.full((1, 3, 2, 2), -2.0)], mod)
    assert V.shape == (1, 2, 3)
    assert torch.allclose(V[0, 0], torch.full((3,), 1.5))
    assert torch.allclose(V[0, 1], torch.full((3,), -2.0))


def test_attributes_shape():
    V = NodeAttributes(8)([torch.rand(2, 8, s, s) for s in (16, 8, 8, 16)])
    assert V.shape == (2, 4, 8)


def test_attribute_hand_mean():
    mod = identity_attributes(1)
    V = mod([torch.tensor([[[[1.0, 2.0], [3.0, 4.0]]]]), torch.ones(1, 1, 2, 2)])
    assert V[0, 0, 0].item() == pytest.approx(2.5)


def test_attributes_empty():
    with pytest.raises(EmptyInputError):
        NodeAttributes(2)([])


def test_adjacency_hand_values():
    V = torch.tensor([[1.0, 0.0], [1.0, 0.0], [0.0, 3.0], [-2.0, 0.0]], dtype=torch.float64)
    A = build_adjacency(V).adjacency
    assert A[0, 1] == 1.0
    assert A[0, 2].item() == pytest.approx(0.5, abs=1e-15)
    assert A[0, 3].item() == pytest.approx(0.0, abs=1e-15)
    assert torch.all(torch.diagonal(A) == 1.0)


def test_zero_norm_strict_and_fallback():
    V = torch.tensor([[0.0, 0.0], [1.0, 2.0], [2.0, -1.0]], dtype=torch.float64)
    with pytest.raises(ZeroNormAttributeError):
        build_adjacency(V)
    A = build_adjacency(V, strict=False).adjacency
    assert torch.all(torch.isfinite(A))
    assert A[0, 1] == 0.5 and A[0, 2] == 0.5 and A[0, 0] == 1.0


def test_degree_matches_rows():
    g = build_adjacency(torch.randn(5, 3, dtype=torch.float64))
    assert torch.allclose(torch.diagonal(g.degree), g.adjacency.sum(-1))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
def test_adjacency_invariants(n, d, seed, c):
    rng = np.random.default_rng(seed)
    V = torch.from_numpy(rng.normal(size=(n, d)))
    A = build_adjacency(V).adjacency
    assert torch.equal(A, A.T)
    assert torch.all(torch.diagonal(A) == 1.0)
    assert A.min() >= 0 and A.max() <= 1
    assert torch.allclose(build_adjacency(c * V).adjacency, A, rtol=0, atol=1e-12)


def test_gcn_single_node_identity():
    X0 = torch.rand(1, 4, dtype=torch.float64)
    g = build_adjacency(torch.ones(1, 4, dtype=torch.float64))
    assert torch.equal(gcn_forward(X0, g, [torch.eye(4, dtype=torch.float64)]), X0)


def test_gcn_two_nodes_average():
    X0 = torch.tensor([[1.0, 2.0], [3.0, 6.0]], dtype=torch.float64)
    A = torch.ones(2, 2, dtype=torch.float64)
    g = FeatureGraph(X0, A, torch.diag(A.sum(-1)))
    out = gcn_forward(X0, g, [torch.eye(2, dtype=torch.float64)])
    assert torch.allclose(out, torch.tensor([[2.0, 4.0], [2.0, 4.0]], dtype=torch.float64))


def test_gcn_dimension_mismatch():
    g = build_adjacency(torch.rand(3, 4, dtype=torch.float64))
    with pytest.raises(DimensionMismatchError):
        gcn_forward(torch.rand(3, 4, dtype=torch.float64), g, [torch.eye(5, dtype=torch.float64)])


def test_gcn_permutation_equivariance():
    torch.manual_seed(0)
    gcn = GCN(6, 3).double()
    X0 = torch.randn(5, 6, dtype=torch.float64)
    g = build_adjacency(X0)
    perm = torch.tensor([3, 0, 4, 1, 2])
    out = gcn(X0, g)
    out_p = gcn(X0[perm], g.permute(perm))
    assert torch.allclose(out_p, out[perm], rtol=0, atol=1e-12)


def test_head_zero_params_gives_half():
    head = WeightHead(8)
    for p in head.parameters():
        torch.nn.init.zeros_(p)
    assert torch.all(weight_head(torch.randn(3, 5, 8), head) == 0.5)


def test_head_open_interval_and_per_node():
    head = WeightHead(4)
    X = torch.randn(6, 4) * 3
    X[1] = X[0]
    r = head(X)
    assert torch.all((r > 0) & (r < 1))
    assert r[0] == r[1]


@pytest.mark.parametrize("mode", ["gcn", "fc"])
def test_weighting_gradient_check(mode):
    torch.manual_seed(2)
    mod = AdaptiveWeighting(3, 2, mode).double()
    feats = [torch.randn(1, 3, s, s, dtype=torch.float64, requires_grad=True) for s in (4, 2, 4, 2)]
    coeff = torch.randn(1, 4, dtype=torch.float64)
    tensors = feats + list(mod.parameters())

    def loss():
        return (mod(feats) * coeff).sum()

    assert analytic_vs_numeric(loss, tensors) < 1e-4


def test_weighting_none_mode():
    mod = AdaptiveWeighting(3, 2, "none")
    r = mod([torch.rand(2, 3, 4, 4) for _ in range(4)])
    assert r.shape == (2, 4) and torch.all(r == 1)


def test_pooled_conv_matches_explicit_conv():
    torch.manual_seed(0)
    mod = NodeAttributes(5).double()
    for hw in ((1, 1), (2, 3), (7, 4), (16, 16)):
        f = torch.randn(3, 5, *hw, dtype=torch.float64)
        explicit = mod.conv(f).mean(dim=(-2, -1))
        assert torch.allclose(mod([f])[:, 0], explicit, rtol=0, atol=1e-12)
