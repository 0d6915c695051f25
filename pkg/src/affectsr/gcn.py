"""Graph-convolution encoder turning landmark coordinates into node embeddings."""

import torch
from torch import nn

DEFAULT_DIMS = (3, 32, 64, 64, 64)


def gcn_layer(features: torch.Tensor, adjacency: torch.Tensor, weight: torch.Tensor,
              bias: torch.Tensor, activate: bool = True) -> torch.Tensor:
    """One propagation step: sigma(A_norm . X . W + b).

    ``features`` is (batch, n, in_dim) or (n, in_dim); ``weight`` is
    (in_dim, out_dim). ReLU is skipped on the final layer so embeddings
    stay signed.
    """
    if features.shape[-2] != adjacency.shape[0]:
        raise ValueError(
            f"feature rows {features.shape[-2]} != graph nodes {adjacency.shape[0]}"
        )
    if features.shape[-1] != weight.shape[0]:
        raise ValueError(f"feature dim {features.shape[-1]} != weight rows {weight.shape[0]}")
    h = torch.matmul(adjacency, torch.matmul(features, weight)) + bias
    return torch.relu(h) if activate else h


class GcnEncoder(nn.Module):
    """Stack of 4 graph-convolution layers over a fixed normalized adjacency.

    Node inputs are the raw (x, y, z) landmark coordinates; output embedding
    width is ``dims[-1]``.
    """

    def __init__(self, adjacency: torch.Tensor, dims=DEFAULT_DIMS):
        super().__init__()
        if len(dims) != 5 or dims[0] != 3:
            raise ValueError(f"need 4 layers starting from 3 input features, got dims={dims}")
        self.register_buffer("adjacency", adjacency.to(torch.get_default_dtype()))
        self.weights = nn.ParameterList(
            nn.Parameter(torch.empty(dims[i], dims[i + 1])) for i in range(4)
        )
        self.biases = nn.ParameterList(
            nn.Parameter(torch.zeros(dims[i + 1])) for i in range(4)
        )
        for w in self.weights:
            nn.init.xavier_uniform_(w)

    @property
    def embed_dim(self) -> int:
        return self.weights[-1].shape[1]

    def forward(self, coords: torch.Tensor) -> torch.Tensor:
        """(batch, n, 3) coordinates -> (batch, n, embed_dim) embeddings."""
        h = coords
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = gcn_layer(h, self.adjacency, w, b, activate=i < last)
        return h
