"""Split-attention fusion of the graph-embedding map into backbone features.

Both modality maps are split into equal-channel blocks, pooled into a joint
descriptor, and re-weighted by per-channel softmax attention across blocks.
The backbone modality's reassembled map is the output; the graph modality
only steers the attention.
"""

import math
from typing import List, Sequence

import torch
from torch import nn


def split_blocks(x: torch.Tensor, block_channels: int) -> List[torch.Tensor]:
    """Split (B, C_m, H, W) into ceil(C_m / C) blocks of C channels.

    The last block is zero-padded up to C; padding is stripped again on
    reassembly.
    """
    if block_channels < 1:
        raise ValueError("block_channels must be >= 1")
    c_m = x.shape[1]
    n_blocks = math.ceil(c_m / block_channels)
    pad = n_blocks * block_channels - c_m
    if pad:
        zeros = x.new_zeros(x.shape[0], pad, *x.shape[2:])
        x = torch.cat([x, zeros], dim=1)
    return list(torch.split(x, block_channels, dim=1))


def channel_descriptor(blocks: Sequence[torch.Tensor]) -> torch.Tensor:
    """Spatial mean of the element-wise block sum: one descriptor of length C
    per sample."""
    if len(blocks) == 0:
        raise ValueError("need at least one block")
    s = blocks[0]
    for b in blocks[1:]:
        s = s + b
    return s.mean(dim=(2, 3))


class SplitAttentionFusion(nn.Module):
    """Fuse two modality maps of matching spatial size.

    ``channels`` gives (backbone C_1, graph C_2). The joint projection maps
    the summed descriptors to C' = floor(C / r) with batch norm + ReLU; each
    modality then gets one bias-free C x C' projection per block whose
    softmax over blocks highlights channels.
    """

    def __init__(self, channels: Sequence[int], block_channels: int = 64, reduction: int = 4):
        super().__init__()
        joint_dim = block_channels // reduction
        if joint_dim < 1:
            raise ValueError(f"floor({block_channels}/{reduction}) must be >= 1")
        self.block_channels = block_channels
        self.joint_dim = joint_dim
        self.num_blocks = [math.ceil(c / block_channels) for c in channels]
        self.joint = nn.Linear(block_channels, joint_dim)
        self.joint_norm = nn.BatchNorm1d(joint_dim)
        self.attn = nn.ModuleList(
            nn.ModuleList(nn.Linear(joint_dim, block_channels, bias=False) for _ in range(n))
            for n in self.num_blocks
        )

    def joint_projection(self, descriptors: Sequence[torch.Tensor]) -> torch.Tensor:
        """Z = ReLU(BatchNorm(W_Z . G + b_Z)) where G sums the descriptors."""
        g = descriptors[0]
        for d in descriptors[1:]:
            if d.shape != g.shape:
                raise ValueError("descriptor length mismatch")
            g = g + d
        return torch.relu(self.joint_norm(self.joint(g)))

    def attention(self, z: torch.Tensor, modality: int) -> torch.Tensor:
        """(B, n_blocks, C) softmax weights across blocks, per channel."""
        logits = torch.stack([proj(z) for proj in self.attn[modality]], dim=1)
        return torch.softmax(logits, dim=1)

    def _reassemble(self, blocks: Sequence[torch.Tensor], weights: torch.Tensor,
                    out_channels: int) -> torch.Tensor:
        scaled = [blk * weights[:, i].unsqueeze(-1).unsqueeze(-1) for i, blk in enumerate(blocks)]
        return torch.cat(scaled, dim=1)[:, :out_channels]

    def forward(self, backbone_feat: torch.Tensor, graph_map: torch.Tensor) -> torch.Tensor:
        if backbone_feat.shape[-2:] != graph_map.shape[-2:]:
            raise ValueError(
                f"spatial mismatch: backbone {tuple(backbone_feat.shape[-2:])} "
                f"vs graph {tuple(graph_map.shape[-2:])}"
            )
        blocks_b = split_blocks(backbone_feat, self.block_channels)
        blocks_g = split_blocks(graph_map, self.block_channels)
        z = self.joint_projection([channel_descriptor(blocks_b), channel_descriptor(blocks_g)])
        weights_b = self.attention(z, 0)
        return self._reassemble(blocks_b, weights_b, backbone_feat.shape[1])
