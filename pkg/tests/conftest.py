import numpy as np
import pytest
import torch

from affectsr.dataio import PairDataset
from affectsr.model import ModelConfig
from affectsr.synth import generate_dataset


def tiny_config(scale=4, variant="full", hr_size=128, seed=0):
    """Smallest practical model: 1 RRDB, 8 channels, 16-dim graph encoder."""
    return ModelConfig(
        scale=scale, variant=variant, hr_size=hr_size,
        base_channels=8, num_blocks=1, growth_channels=4,
        gcn_dims=(3, 16, 16, 16, 16), msaf_block_channels=4, msaf_reduction=2,
        seed=seed,
    )


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toyset")
    generate_dataset(root, count=32, seed=0)
    return root


@pytest.fixture(scope="session")
def toy_samples(toy_root):
    ds = PairDataset(toy_root, scale=4)
    return [ds[i] for i in range(len(ds))]


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def rand_coords(batch=1, gen=None):
    g = gen if gen is not None else torch.Generator().manual_seed(0)
    coords = torch.rand(batch, 478, 3, generator=g)
    coords[..., 2] -= 0.5
    return coords
