"""Feature-relationship graphs and GCN-based adaptive feature weights.

Node attributes are pooled conv responses of each input feature map,
edges are cosine similarities remapped to [0, 1], and a stack of
normalised graph convolutions feeds a small sigmoid head that emits one
weight per feature.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import DimensionMismatchError, EmptyInputError, ZeroNormAttributeError

log = logging.getLogger(__name__)

NORM_FLOOR = 1e-12


@dataclass
class FeatureGraph:
    node_attributes: torch.Tensor  # (..., N, d)
    adjacency: torch.Tensor  # (..., N, N)
    degree: torch.Tensor  # (..., N, N) diagonal

    @property
    def num_nodes(self):
        return self.adjacency.shape[-1]

    def normalized_adjacency(self):
        d = self.adjacency.sum(-1).rsqrt()
        return d[..., :, None] * self.adjacency * d[..., None, :]

    def permute(self, perm):
        perm = torch.as_tensor(perm)
        return FeatureGraph(
            self.node_attributes[..., perm, :],
            self.adjacency[..., perm, :][..., :, perm],
            self.degree[..., perm, :][..., :, perm],
        )


def build_adjacency(V, strict: bool = True) -> FeatureGraph:
    """Cosine-similarity graph over the rows of ``V`` with unit self-loops.

    Off-diagonal entries are (cos + 1) / 2. With ``strict=False`` a zero-norm
    row is treated as orthogonal to everything (uniform 0.5 edges) instead of
    raising.
    """
    if V.shape[-2] < 1:
        raise EmptyInputError("graph needs at least one node")
    norms = V.norm(dim=-1, keepdim=True)
    zero = norms <= NORM_FLOOR
    if bool(zero.any()):
        if strict:
            raise ZeroNormAttributeError("cosine similarity undefined for a zero-norm node attribute")
        log.debug("event=zero_norm_attribute fallback=uniform_adjacency rows=%d", int(zero.sum()))
    unit = torch.where(zero, torch.zeros_like(V), V / torch.where(zero, torch.ones_like(norms), norms))
    cos = (unit @ unit.transpose(-1, -2)).clamp(-1.0, 1.0)
    n = V.shape[-2]
    eye = torch.eye(n, dtype=V.dtype, device=V.device)
    A = (cos + 1) / 2 * (1 - eye) + eye
    A = (A + A.transpose(-1, -2)) / 2
    degree = torch.diag_embed(A.sum(-1))
    return FeatureGraph(V, A, degree)


def gcn_forward(X0, graph: FeatureGraph | None, weights, propagate: bool = True):
    """``M`` propagation layers, ReLU between layers and none after the last.

    ``weights`` holds one (d_in, d_out) matrix per layer. ``propagate=False``
    drops the adjacency, giving a per-node fully-connected stack.
    """
    if propagate:
        if graph.num_nodes != X0.shape[-2]:
            raise DimensionMismatchError("X0", f"{X0.shape[-2]} rows for a {graph.num_nodes}-node graph")
        P = graph.normalized_adjacency()
    X = X0
    for m, W in enumerate(weights):
        if X.shape[-1] != W.shape[0]:
            raise DimensionMismatchError(f"W[{m}]", f"expects {W.shape[0]} inputs, got {X.shape[-1]}")
        X = X @ W
        if propagate:
            X = P @ X
        if m < len(weights) - 1:
            X = torch.relu(X)
    return X


@functools.lru_cache(maxsize=64)
def _window_indicators(n, dtype, device):
    # rows read by kernel offsets 0, 1, 2 of a zero-padded 3-tap filter
    m = torch.ones(3, n, dtype=dtype, device=device)
    m[0, n - 1] = 0
    m[2, 0] = 0
    return m


def pooled_conv3x3(f, weight, bias):
    """GAP(conv3x3(f)) without materialising the convolved map.

    Averaging a zero-padded convolution equals applying the kernel to the
    nine shifted-window sums of ``f``.
    """
    h, w = f.shape[-2:]
    my = _window_indicators(h, f.dtype, f.device)
    mx = _window_indicators(w, f.dtype, f.device)
    sums = (my @ f @ mx.transpose(0, 1)).flatten(1)
    return torch.nn.functional.linear(sums / (h * w), weight.flatten(1), bias)


class NodeAttributes(nn.Module):
    """Shared 3x3 conv followed by global average pooling, one row per feature."""

    def __init__(self, c0):
        super().__init__()
        self.conv = nn.Conv2d(c0, c0, 3, padding=1)

    def forward(self, features):
        if len(features) == 0:
            raise EmptyInputError("node_attributes needs at least one feature map")
        rows = [pooled_conv3x3(f, self.conv.weight, self.conv.bias) for f in features]
        return torch.stack(rows, dim=-2)


def node_attributes(features, module: NodeAttributes):
    return module(features)


class GCN(nn.Module):
    def __init__(self, dim, depth):
        super().__init__()
        self.weights = nn.ParameterList(
            nn.Parameter(nn.init.xavier_uniform_(torch.empty(dim, dim))) for _ in range(depth)
        )

    def forward(self, X0, graph, propagate=True):
        return gcn_forward(X0, graph, list(self.weights), propagate=propagate)


class WeightHead(nn.Module):
    """Two fully-connected layers, d -> d/2 -> 1, sigmoid output per node."""

    def __init__(self, dim):
        super().__init__()
        hidden = max(1, dim // 2)
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, 1)

    def forward(self, X):
        return torch.sigmoid(self.fc2(torch.relu(self.fc1(X)))).squeeze(-1)


def weight_head(X, head: WeightHead):
    return head(X)


class AdaptiveWeighting(nn.Module):
    """Per-feature weights in (0, 1) for a list of feature maps.

    ``mode``: "gcn" (graph propagation), "fc" (same layers without the
    adjacency) or "none" (all weights fixed to one).
    """

    def __init__(self, c0, depth, mode="gcn"):
        super().__init__()
        self.mode = mode
        if mode != "none":
            self.attributes = NodeAttributes(c0)
            self.gcn = GCN(c0, depth)
            self.head = WeightHead(c0)

    def forward(self, features):
        if self.mode == "none":
            f = features[0]
            return torch.ones(f.shape[0], len(features), dtype=f.dtype, device=f.device)
        V = self.attributes(features)
        graph = build_adjacency(V, strict=False) if self.mode == "gcn" else None
        X = self.gcn(V, graph, propagate=self.mode == "gcn")
        return self.head(X)
