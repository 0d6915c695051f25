"""Super-resolution trunk: RRDB blocks with instance norm, bicubic upsampling
stages, and a global bicubic residual from the input."""

import math
from typing import Optional, Sequence

import torch
from torch import nn

from . import bicubic

RDB_CONVS = 5
RDBS_PER_BLOCK = 3
RESIDUAL_SCALE = 0.2


class InstanceNorm2d(nn.Module):
    """Per-sample, per-channel standardization with a learned affine.

    1x1 spatial inputs are degenerate (variance undefined), so standardization
    is skipped there and only the affine applies.
    """

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def standardize(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2] * x.shape[-1] < 2:
            return x
        mu = x.mean(dim=(2, 3), keepdim=True)
        var = x.var(dim=(2, 3), unbiased=False, keepdim=True)
        return (x - mu) / torch.sqrt(var + self.eps)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.standardize(x)
        return y * self.weight.view(1, -1, 1, 1) + self.bias.view(1, -1, 1, 1)


class ResidualDenseBlock(nn.Module):
    """Five densely connected 3x3 convs with a scaled residual.

    Each conv sees the concatenation of the input and all previous outputs.
    Instance norm follows every conv when enabled; leaky-ReLU on convs 1-4.
    """

    def __init__(self, channels: int, growth: int, use_norm: bool, residual_scale: float = RESIDUAL_SCALE):
        super().__init__()
        self.residual_scale = residual_scale
        self.convs = nn.ModuleList()
        self.norms = nn.ModuleList() if use_norm else None
        for i in range(RDB_CONVS):
            out_ch = channels if i == RDB_CONVS - 1 else growth
            self.convs.append(nn.Conv2d(channels + i * growth, out_ch, 3, padding=1))
            if use_norm:
                self.norms.append(InstanceNorm2d(out_ch))
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.convs[0].in_channels:
            raise ValueError(f"expected {self.convs[0].in_channels} channels, got {x.shape[1]}")
        feats = [x]
        for i, conv in enumerate(self.convs):
            h = conv(torch.cat(feats, dim=1))
            if self.norms is not None:
                h = self.norms[i](h)
            if i < RDB_CONVS - 1:
                h = self.act(h)
            feats.append(h)
        return x + self.residual_scale * feats[-1]


class ResidualInResidualBlock(nn.Module):
    """Three sequential dense blocks wrapped in one more scaled residual."""

    def __init__(self, channels: int, growth: int, use_norm: bool, residual_scale: float = RESIDUAL_SCALE):
        super().__init__()
        self.residual_scale = residual_scale
        self.rdbs = nn.ModuleList(
            ResidualDenseBlock(channels, growth, use_norm, residual_scale)
            for _ in range(RDBS_PER_BLOCK)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = x
        for rdb in self.rdbs:
            h = rdb(h)
        return x + self.residual_scale * h


class UpsampleStage(nn.Module):
    """Bicubic x2 followed by conv + leaky-ReLU."""

    def __init__(self, channels: int, factor: int = 2):
        super().__init__()
        if factor != 2:
            raise ValueError(f"unsupported upsample factor {factor}")
        self.factor = factor
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = bicubic.interpolate(x, x.shape[-2] * self.factor, x.shape[-1] * self.factor)
        return self.act(self.conv(h))


def fusion_positions(num_blocks: int) -> tuple:
    """Trunk indices (1-based, after-block) for the first two fusion points.

    Blocks 3 and 6 for the standard 8-block trunk; proportional (never < 1)
    for smaller test configurations.
    """
    p1 = max(1, round(3 * num_blocks / 8))
    p2 = max(1, round(6 * num_blocks / 8))
    return p1, p2


class SrBackbone(nn.Module):
    """Stem conv, RRDB trunk, trunk conv with long skip, upsampling to the
    target scale, two output convs, and a global bicubic residual.

    When fusion modules are attached, graph maps are merged after the first
    two fusion positions in the trunk and once more after the trunk conv.
    """

    def __init__(self, scale: int, hr_size: int = 128, base_channels: int = 64,
                 growth_channels: int = 32, num_blocks: int = 8, use_norm: bool = True,
                 residual_scale: float = RESIDUAL_SCALE,
                 fusion: Optional[nn.ModuleList] = None):
        super().__init__()
        if scale not in (4, 8):
            raise ValueError(f"scale must be 4 or 8, got {scale}")
        if hr_size % scale != 0:
            raise ValueError(f"hr_size {hr_size} not divisible by scale {scale}")
        if fusion is not None and len(fusion) != 3:
            raise ValueError(f"need exactly 3 fusion blocks, got {len(fusion)}")
        self.scale = scale
        self.hr_size = hr_size
        self.lr_size = hr_size // scale
        self.stem = nn.Conv2d(3, base_channels, 3, padding=1)
        self.blocks = nn.ModuleList(
            ResidualInResidualBlock(base_channels, growth_channels, use_norm, residual_scale)
            for _ in range(num_blocks)
        )
        self.trunk_conv = nn.Conv2d(base_channels, base_channels, 3, padding=1)
        self.fusion = fusion
        self.fusion_after = fusion_positions(num_blocks)
        self.upsamples = nn.ModuleList(
            UpsampleStage(base_channels) for _ in range(int(math.log2(scale)))
        )
        self.conv_hr = nn.Conv2d(base_channels, base_channels, 3, padding=1)
        self.conv_last = nn.Conv2d(base_channels, 3, 3, padding=1)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, lr: torch.Tensor, graph_maps: Optional[Sequence[torch.Tensor]] = None,
                clamp: Optional[bool] = None) -> torch.Tensor:
        if lr.shape[-2] != self.lr_size or lr.shape[-1] != self.lr_size:
            raise ValueError(
                f"expected {self.lr_size}x{self.lr_size} input for scale {self.scale}, "
                f"got {lr.shape[-2]}x{lr.shape[-1]}"
            )
        if self.fusion is not None:
            if graph_maps is None or len(graph_maps) != 3:
                n = 0 if graph_maps is None else len(graph_maps)
                raise ValueError(f"fusion needs exactly 3 graph maps, got {n}")
        fea = self.stem(lr)
        trunk = fea
        k = 0
        for i, block in enumerate(self.blocks, start=1):
            trunk = block(trunk)
            while self.fusion is not None and k < 2 and self.fusion_after[k] == i:
                trunk = self.fusion[k](trunk, graph_maps[k])
                k += 1
        fea = fea + self.trunk_conv(trunk)
        if self.fusion is not None:
            fea = self.fusion[2](fea, graph_maps[2])
        for up in self.upsamples:
            fea = up(fea)
        out = self.conv_last(self.act(self.conv_hr(fea)))
        out = out + bicubic.interpolate(lr, self.hr_size, self.hr_size)
        if clamp is None:
            clamp = not self.training
        return out.clamp(0.0, 1.0) if clamp else out
