"""Separable bicubic resampling with the Keys kernel (a = -0.5).

The resize is expressed as two precomputed weight matrices (rows, columns),
so it is differentiable through plain matmul and bit-reproducible across
calls. Border handling clamps source coordinates, and resizing to the input
size is exactly the identity.
"""

import math
from functools import lru_cache

import torch

from .errors import DataError

KERNEL_A = -0.5


def cubic_kernel(x: float, a: float = KERNEL_A) -> float:
    """Cubic convolution weight at offset ``x``."""
    x = abs(float(x))
    if x <= 1.0:
        return (a + 2.0) * x**3 - (a + 3.0) * x**2 + 1.0
    if x < 2.0:
        return a * x**3 - 5.0 * a * x**2 + 8.0 * a * x - 4.0 * a
    return 0.0


@lru_cache(maxsize=256)
def _resize_matrix(in_size: int, out_size: int) -> torch.Tensor:
    """(out_size, in_size) float64 weight matrix for one axis."""
    m = torch.zeros(out_size, in_size, dtype=torch.float64)
    scale = in_size / out_size
    for i in range(out_size):
        src = (i + 0.5) * scale - 0.5
        base = math.floor(src)
        t = src - base
        for off in (-1, 0, 1, 2):
            w = cubic_kernel(t - off)
            j = min(max(base + off, 0), in_size - 1)
            m[i, j] += w
    return m


def interpolate(x: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Bicubic resize of a (..., H, W) tensor, unclamped.

    Used for feature maps and the global residual path where gradients must
    pass through and values may leave [0, 1].
    """
    if height < 1 or width < 1:
        raise ValueError(f"target size must be >= 1, got {height}x{width}")
    mh = _resize_matrix(x.shape[-2], height).to(dtype=x.dtype, device=x.device)
    mw = _resize_matrix(x.shape[-1], width).to(dtype=x.dtype, device=x.device)
    out = torch.matmul(mh, x)
    out = torch.matmul(out, mw.transpose(0, 1))
    return out


def bicubic_resize(img: torch.Tensor, target_h: int, target_w: int) -> torch.Tensor:
    """Resize an image tensor in [0, 1]; output clamped back to [0, 1].

    Rejects non-finite inputs so corrupt data cannot propagate silently.
    """
    if not torch.isfinite(img).all():
        raise DataError("bicubic_resize: input contains non-finite values")
    return interpolate(img, target_h, target_w).clamp(0.0, 1.0)
