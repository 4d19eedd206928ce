import pytest
import torch

from salrefine import RunConfig
from salrefine.datamodel import seed_everything
from salrefine.synth import generate_dataset, write_dataset


@pytest.fixture(autouse=True)
def _seed():
    seed_everything(0)
    yield


@pytest.fixture
def tiny_config():
    return RunConfig(
        num_levels=3,
        aligned_channels=8,
        level_strides=(2, 4, 8),
        spatial_channels=(8, 8, 16),
        temporal_channels=(4, 8, 8),
        image_size=32,
        num_sequences=3,
        frames_per_sequence=3,
        epochs=2,
        batch_size=4,
    )


@pytest.fixture
def tiny_samples(tiny_config):
    return generate_dataset(tiny_config)


@pytest.fixture
def tiny_root(tmp_path, tiny_config, tiny_samples):
    root = tmp_path / "data"
    write_dataset(tiny_samples, root, flow_range=tiny_config.flow_range)
    return root


def double_model(model):
    return model.double().eval()


@pytest.fixture
def f64():
    old = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(old)
