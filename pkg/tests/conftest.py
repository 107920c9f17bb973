import math

import numpy as np
import pytest
import torch
from PIL import Image

from visualsplit.decoder import DecoderConfig
from visualsplit.descriptors import DescriptorConfig, extract_bundle
from visualsplit.encoder import EncoderConfig
from visualsplit.training import TrainConfig


def save_png(img: torch.Tensor, path) -> None:
    arr = (img.clamp(0, 1).numpy() * 255.0).round().astype(np.uint8)
    Image.fromarray(arr).save(path)


def structured_image(i: int = 0, size: int = 64) -> torch.Tensor:
    """Deterministic synthetic test image with edges, colour regions and a
    spread of grey levels."""
    y, x = torch.meshgrid(
        torch.linspace(0, 1, size), torch.linspace(0, 1, size), indexing="ij"
    )
    img = torch.stack(
        [0.5 + 0.5 * torch.sin(2 * math.pi * (x * (i + 1) + y)), y, x], dim=-1
    )
    if i % 2:
        img = img.flip(0)
    s = size // 6
    img[s + i : 3 * s + i, s : 4 * s, :] = torch.tensor([0.8, 0.2 + 0.15 * i, 0.3])
    return img.clamp(0, 1).contiguous()


@pytest.fixture
def rand_image():
    torch.manual_seed(7)
    return torch.rand(16, 16, 3, dtype=torch.float64)


@pytest.fixture
def small_descriptor_config():
    return DescriptorConfig(num_clusters=3, num_bins=20, seed=0)


@pytest.fixture
def small_bundle(rand_image, small_descriptor_config):
    return extract_bundle(rand_image, small_descriptor_config)


@pytest.fixture
def tiny_encoder_config():
    return EncoderConfig(patch_size=4, embed_dim=32, depth=4, num_heads=4, hist_token_count=4, hist_bins=20)


@pytest.fixture
def tiny_decoder_config():
    return DecoderConfig(embed_dim=16, depth=2, num_heads=4, patch_size=4)


@pytest.fixture
def tiny_train_config(tiny_encoder_config, tiny_decoder_config, tmp_path):
    return TrainConfig(
        image_size=16,
        batch_size=2,
        total_steps=50,
        warmup_steps=5,
        base_lr=1e-3,
        seed=0,
        checkpoint_every=0,
        out_dir=str(tmp_path / "run"),
        encoder=tiny_encoder_config,
        decoder=tiny_decoder_config,
        descriptor=DescriptorConfig(num_clusters=3, num_bins=20, seed=0),
    )


@pytest.fixture
def image_folder(tmp_path):
    """Four structured PNGs in a flat folder."""
    root = tmp_path / "images"
    root.mkdir()
    for i in range(4):
        save_png(structured_image(i, 16), root / f"img_{i}.png")
    return root
