import numpy as np
import pytest
import torch

from visualsplit.descriptors import DescriptorConfig, extract_bundle
from visualsplit.losses import (
    LossConfig,
    LossConfigError,
    descriptor_consistency_loss,
    histogram_distance,
    l1_distance,
    perceptual_loss,
    pixel_loss,
    total_loss,
)


def test_loss_config_validation():
    with pytest.raises(LossConfigError):
        LossConfig(w_pixel=0, w_perceptual=0, w_edge=0, w_hist=0, w_colour=0)
    with pytest.raises(LossConfigError):
        LossConfig(w_pixel=-1)
    with pytest.raises(LossConfigError):
        LossConfig(perceptual_mode="vgg")
    with pytest.raises(LossConfigError):
        LossConfig(epsilon=0)


def test_pixel_loss_identity_and_offset():
    torch.manual_seed(0)
    img = torch.rand(6, 6, 3, dtype=torch.float64) * 0.8
    assert float(pixel_loss(img, img)) == 0.0
    assert abs(float(pixel_loss(img + 0.1, img)) - 0.01) < 1e-12


def test_pixel_loss_matches_scalar_loop():
    g = torch.Generator().manual_seed(1)
    a = torch.rand(4, 4, 3, generator=g, dtype=torch.float64)
    b = torch.rand(4, 4, 3, generator=g, dtype=torch.float64)
    ref = 0.0
    for i in range(4):
        for j in range(4):
            for c in range(3):
                ref += (float(a[i, j, c]) - float(b[i, j, c])) ** 2
    ref /= 4 * 4 * 3
    assert abs(float(pixel_loss(a, b)) - ref) < 1e-9


def test_pixel_loss_shape_mismatch():
    with pytest.raises(ValueError):
        pixel_loss(torch.zeros(4, 4, 3), torch.zeros(5, 4, 3))


def test_perceptual_loss_contracts():
    cfg = LossConfig(perceptual_mode="random_features", perceptual_seed=0)
    g = torch.Generator().manual_seed(2)
    a = torch.rand(16, 16, 3, generator=g, dtype=torch.float64)
    b = torch.rand(16, 16, 3, generator=g, dtype=torch.float64)
    assert float(perceptual_loss(a, a, cfg)) == 0.0
    ab = float(perceptual_loss(a, b, cfg))
    ba = float(perceptual_loss(b, a, cfg))
    assert ab > 0
    assert abs(ab - ba) < 1e-9


def test_perceptual_loss_contrast_sensitivity():
    cfg = LossConfig(perceptual_mode="random_features", perceptual_seed=0)
    g = torch.Generator().manual_seed(3)
    a = 0.5 + 0.2 * (torch.rand(16, 16, 3, generator=g, dtype=torch.float64) - 0.5)
    b = 0.5 + 0.2 * (torch.rand(16, 16, 3, generator=g, dtype=torch.float64) - 0.5)
    base = float(perceptual_loss(a, b, cfg))
    doubled = 0.5 + 2.0 * (a - 0.5)
    assert float(perceptual_loss(doubled, b, cfg)) > base


def test_perceptual_mode_off_rejected():
    cfg = LossConfig(perceptual_mode="off")
    with pytest.raises(LossConfigError):
        perceptual_loss(torch.zeros(8, 8, 3), torch.zeros(8, 8, 3), cfg)


def test_histogram_distance_toy_oracle():
    # hand evaluation: (1/2) * ((1-0)^2/(1+0+eps) + (0-1)^2/(0+1+eps))
    d = torch.tensor([1.0, 0.0], dtype=torch.float64)
    d_hat = torch.tensor([0.0, 1.0], dtype=torch.float64)
    eps = 1e-6
    got = float(histogram_distance(d, d_hat, eps))
    want = 0.5 * (1.0 / (1.0 + eps) + 1.0 / (1.0 + eps))
    assert abs(got - want) < 1e-12
    assert abs(got - 0.999999) < 1e-6


def test_histogram_distance_symmetry_and_bound():
    g = torch.Generator().manual_seed(4)
    d = torch.rand(50, generator=g, dtype=torch.float64)
    d = d / d.sum()
    e = torch.rand(50, generator=g, dtype=torch.float64)
    e = e / e.sum()
    assert abs(float(histogram_distance(d, e)) - float(histogram_distance(e, d))) < 1e-15
    assert float(histogram_distance(d, e)) <= 2.0
    assert float(histogram_distance(d, d)) == 0.0


def test_l1_distance_offset_oracle():
    g = torch.Generator().manual_seed(5)
    d = torch.rand(7, 7, generator=g, dtype=torch.float64)
    assert abs(float(l1_distance(d, d + 0.1)) - 0.1) < 1e-12
    assert abs(float(l1_distance(d, d + 0.1, "sum")) - 0.1 * 49) < 1e-10


def test_consistency_zero_for_perfect_reconstruction(rand_image, small_descriptor_config):
    bundle = extract_bundle(rand_image, small_descriptor_config)
    le, lg, lc = descriptor_consistency_loss(rand_image, bundle, LossConfig())
    assert float(le) < 1e-6
    assert float(lg) < 1e-6
    assert float(lc) < 1e-6


def test_consistency_positive_for_perturbed_reconstruction(rand_image, small_descriptor_config):
    bundle = extract_bundle(rand_image, small_descriptor_config)
    recon = (rand_image.flip(0) + 0.05).clamp(0, 1)
    le, lg, lc = descriptor_consistency_loss(recon, bundle, LossConfig())
    assert float(le) > 0 and float(lg) > 0 and float(lc) > 0


def test_total_loss_degenerate_weighting(rand_image, small_descriptor_config):
    bundle = extract_bundle(rand_image, small_descriptor_config)
    recon = rand_image.roll(1, dims=0)
    cfg = LossConfig(w_pixel=1.0, w_perceptual=0.0, w_edge=0.0, w_hist=0.0, w_colour=0.0)
    total, report = total_loss(recon, rand_image, bundle, cfg)
    assert abs(float(total) - float(pixel_loss(recon, rand_image))) < 1e-12


def test_total_loss_zero_at_identity(rand_image, small_descriptor_config):
    bundle = extract_bundle(rand_image, small_descriptor_config)
    total, report = total_loss(rand_image, rand_image, bundle, LossConfig())
    assert float(total) == 0.0
    assert report.total == 0.0


def test_total_is_weighted_sum(rand_image, small_descriptor_config):
    rng = np.random.default_rng(6)
    bundle = extract_bundle(rand_image, small_descriptor_config)
    recon = (rand_image + 0.03).clamp(0, 1)
    w = rng.uniform(0.1, 2.0, size=5)
    cfg = LossConfig(w_pixel=w[0], w_perceptual=w[1], w_edge=w[2], w_hist=w[3], w_colour=w[4])
    total, r = total_loss(recon, rand_image, bundle, cfg)
    recomputed = (
        w[0] * r.pixel + w[1] * r.perceptual + w[2] * r.edge + w[3] * r.hist + w[4] * r.colour
    )
    assert abs(r.total - recomputed) < 1e-9
    assert all(v >= 0 for v in r.to_dict().values())
