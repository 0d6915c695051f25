"""Training loss terms and their weighted combination."""

import math
from dataclasses import dataclass
from typing import Callable, List, Mapping, Sequence

import torch
from torch import nn

from .errors import LossError

HIST_BINS = 32


@dataclass(frozen=True)
class LossWeights:
    """Published term weights; configurable but all must stay >= 0."""

    k1: float = 1.0    # pixel L1
    k2: float = 20.0   # intensity histogram
    k3: float = 50.0   # style (Gram)
    k4: float = 0.1    # node-embedding L2

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "k4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def pixel_l1(sr: torch.Tensor, hr: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over batch and elements.

    Dividing by element count keeps magnitudes resolution-independent.
    """
    _check_same_shape(sr, hr, "pixel_l1")
    return (sr - hr).abs().mean()


def gram(features: torch.Tensor) -> torch.Tensor:
    """(B, C, H, W) -> (B, C, C) second-moment matrix, normalized by C*H*W."""
    b, c, h, w = features.shape
    f = features.reshape(b, c, h * w)
    return torch.matmul(f, f.transpose(1, 2)) / (c * h * w)


def style_loss(sr: torch.Tensor, hr: torch.Tensor,
               feature_extractor: Callable[[torch.Tensor], Sequence[torch.Tensor]]) -> torch.Tensor:
    """Sum over layers of the squared Frobenius distance between Gram
    matrices, averaged over the batch."""
    feats_sr = feature_extractor(sr)
    feats_hr = feature_extractor(hr)
    if len(feats_sr) == 0:
        raise ValueError("feature extractor yielded no layers")
    total = None
    for fs, fh in zip(feats_sr, feats_hr):
        diff = gram(fs) - gram(fh)
        term = diff.pow(2).sum(dim=(1, 2)).mean()
        total = term if total is None else total + term
    return total


def embedding_l2(emb_a: torch.Tensor, emb_b: torch.Tensor) -> torch.Tensor:
    """Sum over nodes and dimensions of squared differences, batch-averaged."""
    _check_same_shape(emb_a, emb_b, "embedding_l2")
    return (emb_a - emb_b).pow(2).sum(dim=(1, 2)).mean()


def soft_histogram(img: torch.Tensor, bins: int = HIST_BINS) -> torch.Tensor:
    """Differentiable per-channel intensity histogram on [0, 1].

    Triangular kernels centered at k/(bins-1) form a partition of unity, so
    frequencies sum to 1 per channel for in-range inputs.
    """
    b, c = img.shape[0], img.shape[1]
    centers = torch.linspace(0.0, 1.0, bins, dtype=img.dtype, device=img.device)
    delta = 1.0 / (bins - 1)
    flat = img.reshape(b, c, -1, 1)
    weights = torch.relu(1.0 - (flat - centers).abs() / delta)
    return weights.mean(dim=2)  # (B, C, bins)


def train_hist_loss(sr: torch.Tensor, hr: torch.Tensor, bins: int = HIST_BINS) -> torch.Tensor:
    """Mean squared difference of soft-histogram bin frequencies."""
    _check_same_shape(sr, hr, "train_hist_loss")
    return (soft_histogram(sr, bins) - soft_histogram(hr, bins)).pow(2).mean()


TERM_NAMES = ("pixel", "hist", "style", "embedding")


def total_loss(components: Mapping[str, torch.Tensor], weights: LossWeights) -> torch.Tensor:
    """k1*pixel + k2*hist + k3*style + k4*embedding; rejects non-finite terms."""
    for name in TERM_NAMES:
        if name not in components:
            raise ValueError(f"missing loss component '{name}'")
        value = components[name]
        value = value.item() if isinstance(value, torch.Tensor) else value
        if not math.isfinite(value):
            raise LossError(f"loss term '{name}' is non-finite ({value})")
    return (weights.k1 * components["pixel"] + weights.k2 * components["hist"]
            + weights.k3 * components["style"] + weights.k4 * components["embedding"])


class IdentityExtractor:
    """Feature extractor that returns the raw pixels as the single layer."""

    def __call__(self, x: torch.Tensor) -> List[torch.Tensor]:
        return [x]


class RandomConvExtractor(nn.Module):
    """Fixed, seeded 2-layer random conv stack used as the default style
    feature extractor; no pretrained weights required. A pretrained backbone
    can be plugged in instead via the same callable interface."""

    def __init__(self, seed: int = 0, channels=(8, 16)):
        super().__init__()
        self.conv1 = nn.Conv2d(3, channels[0], 3, padding=1)
        self.conv2 = nn.Conv2d(channels[0], channels[1], 3, padding=1)
        gen = torch.Generator().manual_seed(seed)
        for conv in (self.conv1, self.conv2):
            fan = conv.in_channels * 9
            bound = math.sqrt(6.0 / fan)
            with torch.no_grad():
                conv.weight.uniform_(-bound, bound, generator=gen)
                conv.bias.zero_()
        self.act = nn.LeakyReLU(0.2)
        self.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        f1 = self.act(self.conv1(x))
        f2 = self.act(self.conv2(f1))
        return [f1, f2]
