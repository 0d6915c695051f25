import pytest
import torch

from affectsr.backbone import InstanceNorm2d
from affectsr.model import ModelConfig, build_model
from affectsr.training import init_params

from conftest import rand_coords, tiny_config


def test_full_variant_shapes_scale8():
    model = init_params(build_model(tiny_config(scale=8))).eval()
    sr, emb = model(torch.rand(2, 3, 16, 16), rand_coords(batch=2))
    assert sr.shape == (2, 3, 128, 128)
    assert emb.shape == (2, 478, 16)


def test_full_variant_shapes_scale4():
    model = init_params(build_model(tiny_config(scale=4))).eval()
    sr, emb = model(torch.rand(1, 3, 32, 32), rand_coords())
    assert sr.shape == (1, 3, 128, 128)
    assert emb.shape == (1, 478, 16)


def test_default_config_dimensions():
    cfg = ModelConfig()
    assert cfg.num_blocks == 8 and cfg.gcn_dims == (3, 32, 64, 64, 64)
    assert cfg.lr_size == 32


def test_rrdb_variant_ignores_landmarks():
    model = init_params(build_model(tiny_config(variant="rrdb"))).eval()
    lr = torch.rand(1, 3, 32, 32)
    coords = rand_coords()
    sr1, emb1 = model(lr, coords)
    moved = coords.clone()
    moved[0, 0, 0] += 0.3
    sr2, _ = model(lr, moved)
    assert emb1 is None
    assert torch.equal(sr1, sr2)


def test_full_variant_requires_landmarks():
    model = build_model(tiny_config())
    with pytest.raises(ValueError):
        model(torch.rand(1, 3, 32, 32))


def test_purity():
    model = init_params(build_model(tiny_config())).eval()
    lr = torch.rand(1, 3, 32, 32)
    coords = rand_coords()
    a, _ = model(lr, coords)
    b, _ = model(lr, coords)
    assert torch.equal(a, b)


def count_params(variant):
    return sum(p.numel() for p in build_model(tiny_config(variant=variant)).parameters())


def test_variant_parameter_monotonicity():
    rrdb = count_params("rrdb")
    rrdb_in = count_params("rrdb_in")
    full = count_params("full")
    model_in = build_model(tiny_config(variant="rrdb_in"))
    affine = sum(p.numel() for m in model_in.modules() if isinstance(m, InstanceNorm2d)
                 for p in m.parameters())
    assert rrdb == rrdb_in - affine
    assert full > rrdb_in
    names_in = {n for n, _ in model_in.named_parameters()}
    names_full = {n for n, _ in build_model(tiny_config(variant="full")).named_parameters()}
    assert names_in.issubset(names_full)


def test_landmark_sensitivity():
    model = init_params(build_model(tiny_config())).eval()
    lr = torch.rand(1, 3, 32, 32)
    coords = rand_coords()
    sr1, _ = model(lr, coords)
    moved = coords.clone()
    moved[0, 0, 0] = (moved[0, 0, 0] + 0.1).clamp(0, 1)
    sr2, _ = model(lr, moved)
    assert (sr1 - sr2).abs().max() > 0


def test_invalid_configs_rejected():
    with pytest.raises(ValueError):
        ModelConfig(scale=3)
    with pytest.raises(ValueError):
        ModelConfig(variant="bogus")
    with pytest.raises(ValueError):
        ModelConfig(scale=8, hr_size=100)


def test_config_dict_roundtrip():
    cfg = tiny_config(scale=8)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
