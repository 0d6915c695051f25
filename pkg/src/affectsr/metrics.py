"""Image-quality metrics and the emotion consistency metric (ECM)."""

import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .errors import PluginError
from .fer import FerPlugin, classify

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
CONFIDENCE_BINS = 10
ECM_ALPHA = 0.5
ECM_CONF_FLOOR = 1e-6
LUMA_WEIGHTS = (0.299, 0.587, 0.114)  # ITU-R 601


def _check_pair(a: torch.Tensor, b: torch.Tensor):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def psnr(a: torch.Tensor, b: torch.Tensor) -> float:
    """10*log10(1/MSE) in dB for [0, 1] images, capped at 100."""
    _check_pair(a, b)
    mse = (a.double() - b.double()).pow(2).mean().item()
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


def _luma(img: torch.Tensor) -> torch.Tensor:
    r, g, b = LUMA_WEIGHTS
    return (r * img[:, 0] + g * img[:, 1] + b * img[:, 2]).unsqueeze(1)


def _gaussian_window(size: int, sigma: float) -> torch.Tensor:
    coords = torch.arange(size, dtype=torch.float64) - (size - 1) / 2.0
    g = torch.exp(-(coords**2) / (2.0 * sigma**2))
    w = torch.outer(g, g)
    return (w / w.sum()).reshape(1, 1, size, size)


def ssim(a: torch.Tensor, b: torch.Tensor) -> float:
    """Mean local SSIM on the luma plane (Gaussian window 11, sigma 1.5)."""
    _check_pair(a, b)
    if a.dim() == 3:
        a, b = a.unsqueeze(0), b.unsqueeze(0)
    if min(a.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"images smaller than the {SSIM_WINDOW}-pixel SSIM window")
    x = _luma(a.double())
    y = _luma(b.double())
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mu_x = F.conv2d(x, win)
    mu_y = F.conv2d(y, win)
    xx = F.conv2d(x * x, win) - mu_x**2
    yy = F.conv2d(y * y, win) - mu_y**2
    xy = F.conv2d(x * y, win) - mu_x * mu_y
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * xy + c2)) / ((mu_x**2 + mu_y**2 + c1) * (xx + yy + c2))
    return ssim_map.mean().item()


def entropy(probs) -> float:
    """Shannon entropy -sum(p ln p) with 0 ln 0 = 0."""
    p = np.asarray(probs, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def confidence_histogram(values, bins: int = CONFIDENCE_BINS) -> np.ndarray:
    """Frequency-normalized histogram of confidence values over [0, 1]."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot histogram an empty value list")
    idx = np.clip((v * bins).astype(int), 0, bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    return counts / v.size


def histogram_loss(orig: Sequence, sr: Sequence, bins: int = CONFIDENCE_BINS) -> float:
    """Sum over classes and bins of squared per-class confidence-histogram
    frequency differences between the two prediction sets."""
    o = np.asarray(orig, dtype=np.float64)
    s = np.asarray(sr, dtype=np.float64)
    if o.shape != s.shape:
        raise ValueError(f"confidence sets differ in shape: {o.shape} vs {s.shape}")
    if o.ndim != 2 or o.shape[0] < 1:
        raise ValueError("need >= 1 paired confidence vectors")
    total = 0.0
    for c in range(o.shape[1]):
        h_o = confidence_histogram(o[:, c], bins)
        h_s = confidence_histogram(s[:, c], bins)
        total += float(((h_o - h_s) ** 2).sum())
    return total


@dataclass(frozen=True)
class EcmReport:
    l_h: float
    l_conf: float
    alpha: float
    ecm: float
    num_samples: int


def ecm_report(orig_probs, sr_probs, alpha: float = ECM_ALPHA) -> EcmReport:
    """Combine the confidence-histogram loss with the log of the mean
    absolute entropy difference; lower means better emotion preservation.

    The log argument is floored at 1e-6, so identical prediction sets land on
    a finite value instead of -inf.
    """
    o = np.asarray(orig_probs, dtype=np.float64)
    s = np.asarray(sr_probs, dtype=np.float64)
    l_h = histogram_loss(o, s)
    diffs = [abs(entropy(po) - entropy(ps)) for po, ps in zip(o, s)]
    l_conf = float(np.mean(diffs))
    value = alpha * l_h + math.log(max(l_conf, ECM_CONF_FLOOR))
    return EcmReport(l_h=l_h, l_conf=l_conf, alpha=alpha, ecm=value, num_samples=o.shape[0])


def ecm(orig_images: Sequence[torch.Tensor], sr_images: Sequence[torch.Tensor],
        plugin: FerPlugin, alpha: float = ECM_ALPHA) -> EcmReport:
    """Classify paired original/super-resolved images and report ECM."""
    if len(orig_images) != len(sr_images):
        raise ValueError(f"paired lists differ in length: {len(orig_images)} vs {len(sr_images)}")
    if len(orig_images) == 0:
        raise ValueError("need at least one image pair")
    orig_probs, sr_probs = [], []
    for i, (o, s) in enumerate(zip(orig_images, sr_images)):
        try:
            orig_probs.append(classify(o, plugin))
            sr_probs.append(classify(s, plugin))
        except PluginError as exc:
            raise PluginError(f"FER plugin failed on sample {i}: {exc}") from exc
    return ecm_report(np.stack(orig_probs), np.stack(sr_probs), alpha)


def lpips(a: torch.Tensor, b: torch.Tensor, plugin) -> Optional[float]:
    """Plugin-reported perceptual distance; None when unconfigured or on
    plugin failure (run continues, metric marked unavailable)."""
    if plugin is None:
        return None
    try:
        return float(plugin.distance(a, b))
    except Exception as exc:
        warnings.warn(f"LPIPS plugin failed ({exc}); metric marked unavailable")
        return None


class MeanL2LpipsPlugin:
    """Trivial stand-in perceptual-distance plugin (mean squared difference).

    Exists so the optional-metric plumbing is exercisable without a
    pretrained network; real LPIPS models plug in via the same interface.
    """

    name = "l2"

    def distance(self, a: torch.Tensor, b: torch.Tensor) -> float:
        return (a.double() - b.double()).pow(2).mean().item()


def resolve_lpips_plugin(spec: str):
    if not spec or spec == "none":
        return None
    if spec == "l2":
        return MeanL2LpipsPlugin()
    raise PluginError(f"unknown LPIPS plugin spec '{spec}' (use 'l2' or 'none')")
