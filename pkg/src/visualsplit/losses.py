"""Pre-training objective: pixel MSE + perceptual distance + the three-term
descriptor consistency loss (edge L1, chi-square histogram distance, colour
render L1), each re-extracted differentiably from the reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch
import torch.nn as nn
from torch import Tensor

from .descriptors import (
    AB_SCALE,
    DescriptorBundle,
    extract_edges,
    extract_histogram,
    reassign_segments,
    render_segmentation,
    srgb_to_lab,
)

PERCEPTUAL_MODES = ("off", "random_features", "pretrained_features")


class LossConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LossConfig:
    w_pixel: float = 1.0
    w_perceptual: float = 0.5
    w_edge: float = 0.2
    w_hist: float = 0.2
    w_colour: float = 0.2
    epsilon: float = 1e-6
    perceptual_mode: str = "random_features"
    perceptual_seed: int = 0
    reduction: str = "mean"  # mean | sum, for the L1 terms

    def __post_init__(self):
        weights = (self.w_pixel, self.w_perceptual, self.w_edge, self.w_hist, self.w_colour)
        if any(w < 0 for w in weights):
            raise LossConfigError("loss weights must be non-negative")
        if not any(w > 0 for w in weights):
            raise LossConfigError("at least one loss weight must be positive")
        if self.epsilon <= 0:
            raise LossConfigError("epsilon must be positive")
        if self.perceptual_mode not in PERCEPTUAL_MODES:
            raise LossConfigError(f"perceptual_mode must be one of {PERCEPTUAL_MODES}")
        if self.reduction not in ("mean", "sum"):
            raise LossConfigError("reduction must be 'mean' or 'sum'")


@dataclass
class LossReport:
    total: float
    pixel: float
    perceptual: float
    edge: float
    hist: float
    colour: float

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "pixel": self.pixel,
            "perceptual": self.perceptual,
            "edge": self.edge,
            "hist": self.hist,
            "colour": self.colour,
        }


def _check_same_shape(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def pixel_loss(recon: Tensor, target: Tensor) -> Tensor:
    _check_same_shape(recon, target)
    return ((recon - target) ** 2).mean()


class RandomFeaturePyramid(nn.Module):
    """Small frozen conv pyramid with seeded random weights; a desk-scale
    stand-in for a pretrained perceptual network."""

    def __init__(self, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(3, 16, 3, padding=1),
                nn.Conv2d(16, 32, 3, stride=2, padding=1),
                nn.Conv2d(32, 64, 3, stride=2, padding=1),
            ]
        )
        for conv in self.convs:
            with torch.no_grad():
                conv.weight.copy_(
                    torch.randn(conv.weight.shape, generator=gen) / conv.weight[0].numel() ** 0.5
                )
                conv.bias.zero_()
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, img: Tensor) -> list[Tensor]:
        x = img.permute(2, 0, 1).unsqueeze(0) if img.ndim == 3 else img
        feats = []
        for conv in self.convs:
            x = torch.nn.functional.gelu(conv(x))
            feats.append(x)
        return feats


_pretrained_extractor: Callable[[Tensor], list[Tensor]] | None = None
_random_pyramids: dict[int, RandomFeaturePyramid] = {}


def register_pretrained_extractor(fn: Callable[[Tensor], list[Tensor]] | None) -> None:
    """Plug in an LPIPS-style feature extractor for pretrained_features mode."""
    global _pretrained_extractor
    _pretrained_extractor = fn


def _extractor(config: LossConfig) -> Callable[[Tensor], list[Tensor]]:
    if config.perceptual_mode == "pretrained_features":
        if _pretrained_extractor is None:
            raise LossConfigError(
                "perceptual_mode=pretrained_features but no extractor registered"
            )
        return _pretrained_extractor
    if config.perceptual_seed not in _random_pyramids:
        _random_pyramids[config.perceptual_seed] = RandomFeaturePyramid(config.perceptual_seed)
    return _random_pyramids[config.perceptual_seed]


def perceptual_loss(recon: Tensor, target: Tensor, config: LossConfig) -> Tensor:
    if config.perceptual_mode == "off":
        raise LossConfigError("perceptual loss requested with perceptual_mode=off")
    _check_same_shape(recon, target)
    extractor = _extractor(config)
    if isinstance(extractor, nn.Module):
        extractor = extractor.to(recon.dtype)
    fa = extractor(recon)
    fb = extractor(target)
    terms = [((a - b) ** 2).mean() for a, b in zip(fa, fb)]
    return sum(terms) / len(terms)


def l1_distance(d: Tensor, d_hat: Tensor, reduction: str = "mean") -> Tensor:
    _check_same_shape(d, d_hat)
    diff = (d - d_hat).abs()
    return diff.mean() if reduction == "mean" else diff.sum()


def histogram_distance(d: Tensor, d_hat: Tensor, epsilon: float = 1e-6) -> Tensor:
    """(1/N) * sum_i (d_i - d̂_i)^2 / (d_i + d̂_i + eps); symmetric, <= 2 for
    normalized histograms."""
    _check_same_shape(d, d_hat)
    n = d.shape[0]
    return ((d - d_hat) ** 2 / (d + d_hat + epsilon)).sum() / n


def descriptor_consistency_loss(
    recon: Tensor, bundle: DescriptorBundle, config: LossConfig
) -> tuple[Tensor, Tensor, Tensor]:
    """Re-extract descriptors from the reconstruction and compare.

    Colour re-extraction recomputes soft assignments against the bundle's
    centroids, so the map stays cluster-aligned with the original and the
    term vanishes exactly on a perfect reconstruction.
    """
    lab_hat = srgb_to_lab(recon)
    cfg = bundle.config

    edges_hat = extract_edges(lab_hat)
    loss_e = l1_distance(
        bundle.edges.normalized.to(recon.dtype), edges_hat.normalized, config.reduction
    )

    hist_hat = extract_histogram(lab_hat, cfg.num_bins, cfg.bandwidth)
    loss_g = histogram_distance(
        bundle.histogram.weights.to(recon.dtype), hist_hat.weights, config.epsilon
    )

    seg_hat = reassign_segments(
        lab_hat, bundle.segmentation.centroids.detach(), cfg.temperature
    )
    render = render_segmentation(bundle.segmentation).ab_render.to(recon.dtype)
    render_hat = render_segmentation(seg_hat).ab_render
    # compare renders in normalized ab units so the term is O(1) like the others
    loss_c = l1_distance(render / AB_SCALE, render_hat / AB_SCALE, config.reduction)
    return loss_e, loss_g, loss_c


def total_loss(
    recon: Tensor, target: Tensor, bundle: DescriptorBundle, config: LossConfig
) -> tuple[Tensor, LossReport]:
    """Weighted sum of all components; returns the scalar for backprop plus a
    float report."""
    zero = recon.new_zeros(())
    pix = pixel_loss(recon, target) if config.w_pixel > 0 else zero
    if config.w_perceptual > 0 and config.perceptual_mode != "off":
        perc = perceptual_loss(recon, target, config)
    else:
        perc = zero
    if config.w_edge > 0 or config.w_hist > 0 or config.w_colour > 0:
        loss_e, loss_g, loss_c = descriptor_consistency_loss(recon, bundle, config)
    else:
        loss_e = loss_g = loss_c = zero
    total = (
        config.w_pixel * pix
        + config.w_perceptual * perc
        + config.w_edge * loss_e
        + config.w_hist * loss_g
        + config.w_colour * loss_c
    )
    report = LossReport(
        total=float(total.detach()),
        pixel=float(pix.detach()),
        perceptual=float(perc.detach()),
        edge=float(loss_e.detach()),
        hist=float(loss_g.detach()),
        colour=float(loss_c.detach()),
    )
    return total, report
