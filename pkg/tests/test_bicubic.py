import math

import pytest
import torch

from affectsr.bicubic import bicubic_resize, cubic_kernel, interpolate
from affectsr.errors import DataError


def naive_resize(img, out_h, out_w, a=-0.5):
    """Independent scalar-loop oracle: same kernel, coordinate map, clamping."""
    def kernel(x):
        x = abs(x)
        if x <= 1:
            return (a + 2) * x**3 - (a + 3) * x**2 + 1
        if x < 2:
            return a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a
        return 0.0

    in_h, in_w = img.shape[-2], img.shape[-1]
    out = torch.zeros(*img.shape[:-2], out_h, out_w, dtype=img.dtype)
    for oy in range(out_h):
        sy = (oy + 0.5) * in_h / out_h - 0.5
        by = math.floor(sy)
        for ox in range(out_w):
            sx = (ox + 0.5) * in_w / out_w - 0.5
            bx = math.floor(sx)
            acc = torch.zeros(img.shape[:-2], dtype=img.dtype)
            for dy in (-1, 0, 1, 2):
                wy = kernel(sy - (by + dy))
                iy = min(max(by + dy, 0), in_h - 1)
                for dx in (-1, 0, 1, 2):
                    wx = kernel(sx - (bx + dx))
                    ix = min(max(bx + dx, 0), in_w - 1)
                    acc = acc + wy * wx * img[..., iy, ix]
            out[..., oy, ox] = acc
    return out


def test_kernel_weight_at_half():
    # W(0.5) = (a+2)/8 - (a+3)/4 + 1 with a = -0.5
    assert cubic_kernel(0.5) == pytest.approx(0.5625, abs=0)


@pytest.mark.parametrize("in_shape,out_shape", [((7, 5), (3, 4)), ((4, 6), (9, 8)), ((8, 8), (5, 5))])
def test_matches_naive_oracle(in_shape, out_shape):
    img = torch.rand(2, 3, *in_shape, dtype=torch.float64, generator=torch.Generator().manual_seed(1))
    got = interpolate(img, *out_shape)
    want = naive_resize(img, *out_shape)
    assert torch.allclose(got, want, atol=1e-12)


def test_paper_scale_factors():
    img = torch.rand(1, 3, 128, 128)
    assert bicubic_resize(img, 32, 32).shape == (1, 3, 32, 32)
    assert bicubic_resize(img, 16, 16).shape == (1, 3, 16, 16)


def test_constant_image_stays_constant():
    img = torch.full((1, 3, 12, 12), 0.42)
    for size in (5, 12, 30):
        out = bicubic_resize(img, size, size)
        assert torch.allclose(out, torch.full_like(out, 0.42), atol=1e-6)


def test_idempotent_at_fixed_size():
    img = torch.rand(1, 3, 20, 14)
    first = bicubic_resize(img, 9, 11)
    second = bicubic_resize(first, 9, 11)
    assert torch.equal(first, second)


def test_down_up_constant_roundtrip():
    img = torch.full((1, 3, 128, 128), 0.7)
    down = bicubic_resize(img, 16, 16)
    up = bicubic_resize(down, 128, 128)
    assert (up - 0.7).abs().max() < 1e-6


def test_output_clamped():
    img = torch.zeros(1, 1, 8, 8)
    img[0, 0, 0, 0] = 1.0  # sharp edge overshoots without the clamp
    out = bicubic_resize(img, 32, 32)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_rejects_nonfinite():
    img = torch.rand(1, 3, 8, 8)
    img[0, 0, 0, 0] = float("nan")
    with pytest.raises(DataError):
        bicubic_resize(img, 4, 4)


def test_gradient_flows_through_interpolate():
    img = torch.rand(1, 3, 8, 8, dtype=torch.float64, requires_grad=True)
    interpolate(img, 16, 16).sum().backward()
    assert img.grad is not None and torch.isfinite(img.grad).all()
