"""Landmark graph: fixed edge topology, normalized adjacency, rasterization.

The 478-node edge list connects the expression-bearing regions (lips, eyes,
eyebrows, face oval, irises) plus a few cheek links and ships as a versioned
data file so tests can pin against it. Topology is fixed; only coordinates
vary per face.
"""

from dataclasses import dataclass
from importlib import resources
from typing import Optional

import torch
from torch import nn

NUM_LANDMARKS = 478
EDGE_ASSET = "face_edges_v1.txt"


@dataclass(frozen=True)
class FaceGraph:
    num_nodes: int
    edges: tuple  # undirected (i, j) pairs, i != j, no duplicates
    adjacency_norm: Optional[torch.Tensor] = None  # (n, n) float64

    def __post_init__(self):
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-edge on node {i}")
            if not (0 <= i < self.num_nodes and 0 <= j < self.num_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range for {self.num_nodes} nodes")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate undirected edge ({i}, {j})")
            seen.add(key)


def canonical_edges() -> FaceGraph:
    """Load the shipped 478-node edge list (deterministic, unnormalized)."""
    text = resources.files("affectsr.assets").joinpath(EDGE_ASSET).read_text()
    edges = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        i, j = line.split()
        edges.append((int(i), int(j)))
    return FaceGraph(num_nodes=NUM_LANDMARKS, edges=tuple(edges))


def normalize_adjacency(graph: FaceGraph) -> FaceGraph:
    """Symmetric normalization with self-loops: D^-1/2 (A + I) D^-1/2."""
    n = graph.num_nodes
    a = torch.zeros(n, n, dtype=torch.float64)
    for i, j in graph.edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    a_hat = a + torch.eye(n, dtype=torch.float64)
    deg = a_hat.sum(dim=1)
    d_inv_sqrt = deg.rsqrt()
    norm = d_inv_sqrt.unsqueeze(1) * a_hat * d_inv_sqrt.unsqueeze(0)
    return FaceGraph(num_nodes=n, edges=graph.edges, adjacency_norm=norm)


def canonical_graph() -> FaceGraph:
    return normalize_adjacency(canonical_edges())


def scatter_embeddings(emb: torch.Tensor, coords: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Scatter-add node embeddings into a (B, E, H, W) grid.

    Each node's vector lands in cell (floor(y*H), floor(x*W)), clamped to the
    grid; coordinates carry no gradient, embeddings do.
    """
    if emb.shape[:2] != coords.shape[:2]:
        raise ValueError(
            f"embeddings {tuple(emb.shape)} and coords {tuple(coords.shape)} disagree on batch/node count"
        )
    b, n, e = emb.shape
    col = (coords[..., 0] * width).floor().long().clamp(0, width - 1)
    row = (coords[..., 1] * height).floor().long().clamp(0, height - 1)
    flat_idx = row * width + col  # (B, N)
    out = emb.new_zeros(b, e, height * width)
    index = flat_idx.unsqueeze(1).expand(b, e, n)
    out.scatter_add_(2, index, emb.transpose(1, 2))
    return out.reshape(b, e, height, width)


class EmbeddingRasterizer(nn.Module):
    """Scatter node embeddings onto the feature grid, then densify with a
    learned 3x3 smoothing convolution."""

    def __init__(self, embed_dim: int):
        super().__init__()
        self.smooth = nn.Conv2d(embed_dim, embed_dim, 3, padding=1)

    def forward(self, emb: torch.Tensor, coords: torch.Tensor, height: int, width: int) -> torch.Tensor:
        return self.smooth(scatter_embeddings(emb, coords, height, width))
