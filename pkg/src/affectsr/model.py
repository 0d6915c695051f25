"""End-to-end model assembly: landmark encoder, rasterizer, fused backbone."""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import torch
from torch import nn

from .backbone import RESIDUAL_SCALE, SrBackbone
from .facegraph import EmbeddingRasterizer, canonical_graph
from .fusion import SplitAttentionFusion
from .gcn import DEFAULT_DIMS, GcnEncoder

VARIANTS = ("rrdb", "rrdb_in", "full")


@dataclass(frozen=True)
class ModelConfig:
    scale: int = 4
    variant: str = "full"
    hr_size: int = 128
    base_channels: int = 64
    num_blocks: int = 8
    growth_channels: int = 32
    residual_scale: float = RESIDUAL_SCALE
    gcn_dims: tuple = field(default=DEFAULT_DIMS)
    msaf_block_channels: int = 32
    msaf_reduction: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.scale not in (4, 8):
            raise ValueError(f"scale must be 4 or 8, got {self.scale}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got '{self.variant}'")
        if self.hr_size % self.scale != 0:
            raise ValueError(f"hr_size {self.hr_size} not divisible by scale {self.scale}")

    @property
    def lr_size(self) -> int:
        return self.hr_size // self.scale

    @property
    def embed_dim(self) -> int:
        return self.gcn_dims[-1]

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "variant": self.variant,
            "hr_size": self.hr_size,
            "base_channels": self.base_channels,
            "num_blocks": self.num_blocks,
            "growth_channels": self.growth_channels,
            "residual_scale": self.residual_scale,
            "gcn_dims": list(self.gcn_dims),
            "msaf_block_channels": self.msaf_block_channels,
            "msaf_reduction": self.msaf_reduction,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        d["gcn_dims"] = tuple(d.get("gcn_dims", DEFAULT_DIMS))
        return ModelConfig(**d)


class AffectSRNet(nn.Module):
    """Emotion-aware face super-resolution network.

    Variants: ``rrdb`` is the bare trunk, ``rrdb_in`` adds instance norm
    inside the dense blocks, ``full`` adds the landmark-graph encoder and the
    three split-attention fusion points.
    """

    def __init__(self, config: ModelConfig, graph=None):
        super().__init__()
        self.config = config
        use_norm = config.variant != "rrdb"
        fusion = None
        if config.variant == "full":
            fusion = nn.ModuleList(
                SplitAttentionFusion(
                    (config.base_channels, config.embed_dim),
                    block_channels=config.msaf_block_channels,
                    reduction=config.msaf_reduction,
                )
                for _ in range(3)
            )
        self.backbone = SrBackbone(
            scale=config.scale,
            hr_size=config.hr_size,
            base_channels=config.base_channels,
            growth_channels=config.growth_channels,
            num_blocks=config.num_blocks,
            use_norm=use_norm,
            residual_scale=config.residual_scale,
            fusion=fusion,
        )
        if config.variant == "full":
            if graph is None:
                graph = canonical_graph()
            self.encoder = GcnEncoder(graph.adjacency_norm, dims=config.gcn_dims)
            self.rasterizer = EmbeddingRasterizer(config.embed_dim)
        else:
            self.encoder = None
            self.rasterizer = None

    def encode_landmarks(self, coords: torch.Tensor) -> torch.Tensor:
        """(B, 478, 3) coordinates -> (B, 478, embed_dim) node embeddings."""
        return self.encoder(coords.to(next(self.parameters()).dtype))

    def forward(self, lr: torch.Tensor, coords: Optional[torch.Tensor] = None,
                clamp: Optional[bool] = None) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        """Super-resolve a batch; returns (sr, node embeddings or None).

        Embeddings are computed once and reused at all three fusion points;
        the same final-layer embeddings feed the node-embedding loss.
        """
        if self.config.variant != "full":
            return self.backbone(lr, None, clamp=clamp), None
        if coords is None:
            raise ValueError("variant 'full' requires landmark coordinates")
        emb = self.encode_landmarks(coords)
        gmap = self.rasterizer(emb, coords, lr.shape[-2], lr.shape[-1])
        sr = self.backbone(lr, [gmap, gmap, gmap], clamp=clamp)
        return sr, emb


def build_model(config: ModelConfig, graph=None) -> AffectSRNet:
    return AffectSRNet(config, graph=graph)
