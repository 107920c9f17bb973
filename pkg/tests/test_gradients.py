"""Analytic gradients vs central finite differences for every differentiable
descriptor op and the loss path, on 8x8 double-precision inputs."""

import pytest
import torch

from visualsplit.color import srgb_to_lab
from visualsplit.descriptors import (
    DescriptorConfig,
    extract_bundle,
    extract_colour_segments,
    extract_edges,
    extract_histogram,
    render_segmentation,
)
from visualsplit.losses import LossConfig, descriptor_consistency_loss

SEED = 123


def _projection(shape, seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(shape, generator=g, dtype=torch.float64)


def finite_difference_grad(fn, x: torch.Tensor, h: float = 1e-6) -> torch.Tensor:
    """Central differences, scalar loop over every input element."""
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = float(flat[i])
        flat[i] = orig + h
        hi = float(fn(x))
        flat[i] = orig - h
        lo = float(fn(x))
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * h)
    return grad


def check_op_gradient(fn, x: torch.Tensor, rel_tol: float, h: float = 1e-6):
    x = x.clone().requires_grad_(True)
    fn(x).backward()
    analytic = x.grad.clone()
    numeric = finite_difference_grad(fn, x.detach().clone(), h=h)
    denom = numeric.abs().max().clamp(min=1e-8)
    rel = (analytic - numeric).abs().max() / denom
    assert float(rel) < rel_tol, f"relative gradient error {float(rel):.3e}"


@pytest.fixture
def rgb8():
    g = torch.Generator().manual_seed(SEED)
    # keep away from the [0, 1] boundary so finite differences stay in-domain
    return torch.rand(8, 8, 3, generator=g, dtype=torch.float64) * 0.9 + 0.05


def test_rgb_to_lab_gradient(rgb8):
    proj = _projection((8, 8, 3), 1)
    check_op_gradient(lambda x: (srgb_to_lab(x) * proj).sum(), rgb8, 1e-4)


def test_extract_edges_gradient(rgb8):
    proj = _projection((8, 8), 2)
    check_op_gradient(
        lambda x: (extract_edges(srgb_to_lab(x)).magnitude * proj).sum(), rgb8, 1e-4
    )


def test_extract_histogram_gradient(rgb8):
    proj = _projection((20,), 3)
    check_op_gradient(
        lambda x: (extract_histogram(srgb_to_lab(x), 20, 2.0).weights * proj).sum(),
        rgb8,
        1e-4,
    )


def test_colour_segments_gradient(rgb8):
    proj = _projection((3, 2), 4)

    def fn(x):
        seg = extract_colour_segments(srgb_to_lab(x), 3, iterations=4, seed=0)
        return (seg.centroids * proj).sum()

    check_op_gradient(fn, rgb8, 1e-4, h=1e-5)


def test_render_segmentation_gradient(rgb8):
    proj = _projection((8, 8, 2), 5)

    def fn(x):
        seg = extract_colour_segments(srgb_to_lab(x), 3, iterations=4, seed=0)
        return (render_segmentation(seg).ab_render * proj).sum()

    check_op_gradient(fn, rgb8, 1e-4, h=1e-5)


def test_descriptor_consistency_loss_gradient(rgb8):
    cfg = DescriptorConfig(num_clusters=3, num_bins=20, kmeans_iterations=4, seed=0)
    g = torch.Generator().manual_seed(SEED + 1)
    target = torch.rand(8, 8, 3, generator=g, dtype=torch.float64) * 0.9 + 0.05
    bundle = extract_bundle(target, cfg)
    loss_cfg = LossConfig()

    def fn(x):
        le, lg, lc = descriptor_consistency_loss(x, bundle, loss_cfg)
        return le + lg + lc

    check_op_gradient(fn, rgb8, 1e-3, h=1e-5)
