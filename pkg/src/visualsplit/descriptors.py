"""Differentiable classical descriptors: Sobel edges, soft k-means colour
segmentation on (a, b), and a Gaussian-smoothed grey-level histogram of L.

Every extraction op is a pure, deterministic function of (input, config);
the only randomness is the seeded k-means++ initialization, which is
detached from the autograd graph so gradients flow through the fixed
update iterations only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor

from .color import lab_to_srgb, srgb_to_lab

# Smoothing constant inside the Sobel magnitude sqrt, keeps it differentiable at 0.
EDGE_EPS = 1e-8
# Max theoretical Sobel response for L in [0, 100]: |Gx|,|Gy| <= 4*100.
EDGE_NORM = float(400.0 * np.sqrt(2.0))
# Scale applied to (a, b) values when building encoder input planes.
AB_SCALE = 110.0

_SOBEL_X = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]
_SOBEL_Y = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]]


@dataclass(frozen=True)
class DescriptorConfig:
    """Extraction parameters shared by all three descriptors."""

    num_clusters: int = 6
    kmeans_iterations: int = 10
    temperature: float = 25.0
    num_bins: int = 100
    bandwidth: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.num_clusters < 1:
            raise ValueError("num_clusters must be >= 1")
        if self.kmeans_iterations < 1:
            raise ValueError("kmeans_iterations must be >= 1")
        if self.num_bins < 2:
            raise ValueError("num_bins must be >= 2")
        if self.bandwidth <= 0 or self.temperature <= 0:
            raise ValueError("bandwidth and temperature must be positive")


@dataclass
class EdgeMap:
    magnitude: Tensor  # (H, W), raw Sobel gradient magnitude of L
    normalization: float = EDGE_NORM

    @property
    def normalized(self) -> Tensor:
        return self.magnitude / self.normalization


@dataclass
class GreyLevelHistogram:
    weights: Tensor      # (num_bins,), sums to 1
    bin_centres: Tensor  # (num_bins,), strictly increasing over [0, 100]
    bandwidth: float

    @property
    def num_bins(self) -> int:
        return int(self.weights.shape[0])

    def mean_level(self) -> float:
        return float((self.weights * self.bin_centres).sum())


@dataclass
class ColourSegmentationMap:
    assignments: Tensor  # (H, W, K), rows sum to 1
    centroids: Tensor    # (K, 2) in (a, b) space
    temperature: float

    @property
    def num_clusters(self) -> int:
        return int(self.centroids.shape[0])

    def argmax_labels(self) -> Tensor:
        return self.assignments.argmax(dim=-1)


@dataclass
class SegmentationRender:
    ab_render: Tensor    # (H, W, 2)
    display_rgb: Tensor  # (H, W, 3), composited with L=50


@dataclass
class DescriptorBundle:
    edges: EdgeMap
    segmentation: ColourSegmentationMap
    histogram: GreyLevelHistogram
    config: DescriptorConfig
    height: int
    width: int


def rgb_to_lab_image(rgb: Tensor) -> Tensor:
    """RGB (H, W, 3) in [0, 1] -> LAB (H, W, 3)."""
    if rgb.ndim != 3 or rgb.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {tuple(rgb.shape)}")
    return srgb_to_lab(rgb)


def extract_edges(lab: Tensor) -> EdgeMap:
    """Sobel gradient magnitude of the L channel, reflect-padded."""
    L = lab[..., 0]
    x = L[None, None]  # (1, 1, H, W)
    kx = torch.tensor(_SOBEL_X, dtype=lab.dtype, device=lab.device)[None, None]
    ky = torch.tensor(_SOBEL_Y, dtype=lab.dtype, device=lab.device)[None, None]
    xp = F.pad(x, (1, 1, 1, 1), mode="reflect")
    gx = F.conv2d(xp, kx)
    gy = F.conv2d(xp, ky)
    mag = torch.sqrt(gx * gx + gy * gy + EDGE_EPS)[0, 0]
    return EdgeMap(magnitude=mag)


def extract_histogram(lab: Tensor, num_bins: int = 100, bandwidth: float = 2.0) -> GreyLevelHistogram:
    """Gaussian-kernel histogram of L over [0, 100], normalized to sum 1."""
    if num_bins < 2:
        raise ValueError("num_bins must be >= 2")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    L = lab[..., 0].reshape(-1)
    width = 100.0 / num_bins
    centres = (torch.arange(num_bins, dtype=lab.dtype, device=lab.device) + 0.5) * width
    d = L[:, None] - centres[None, :]
    raw = torch.exp(-(d * d) / (2.0 * bandwidth * bandwidth)).sum(dim=0)
    weights = raw / raw.sum()
    return GreyLevelHistogram(weights=weights, bin_centres=centres, bandwidth=bandwidth)


def _kmeanspp_init_indices(ab: np.ndarray, k: int, seed: int) -> np.ndarray:
    """k-means++ seeding on a pixel-order-invariant subsample.

    Points are lexicographically sorted by value before subsampling, so the
    selection depends only on the multiset of pixel values. Returns indices
    into the original pixel array; the caller gathers the live tensor values
    so gradients also flow through the chosen seeds.
    """
    order = np.lexsort((ab[:, 1], ab[:, 0]))
    if len(order) > 2048:
        sub = np.linspace(0, len(order) - 1, 2048).round().astype(int)
        order = order[sub]
    pts = ab[order]
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(len(pts)))]
    for _ in range(1, k):
        d2 = np.min(((pts[:, None, :] - pts[chosen][None, :, :]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        if total <= 0:
            chosen.append(int(rng.integers(len(pts))))
        else:
            chosen.append(int(rng.choice(len(pts), p=d2 / total)))
    return order[chosen]


def soft_kmeans_free_energy(ab: Tensor, centroids: Tensor, temperature: float) -> Tensor:
    """-T * sum_p log sum_k exp(-||ab_p - c_k||^2 / T); non-increasing under updates."""
    d2 = torch.cdist(ab, centroids) ** 2
    return -temperature * torch.logsumexp(-d2 / temperature, dim=1).sum()


def extract_colour_segments(
    lab: Tensor,
    num_clusters: int,
    iterations: int = 10,
    temperature: float = 25.0,
    seed: int = 0,
    init_centroids: Tensor | None = None,
) -> ColourSegmentationMap:
    """Soft k-means on the (a, b) channels with a fixed iteration count.

    ``init_centroids`` warm-starts the iterations (used by the consistency
    loss so re-extracted maps are cluster-aligned with the originals).
    """
    if num_clusters < 1:
        raise ValueError("num_clusters must be >= 1")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    h, w = lab.shape[0], lab.shape[1]
    ab = lab[..., 1:].reshape(-1, 2)
    if init_centroids is not None:
        if init_centroids.shape != (num_clusters, 2):
            raise ValueError("init_centroids must have shape (K, 2)")
        centroids = init_centroids.to(dtype=ab.dtype, device=ab.device)
    else:
        idx = _kmeanspp_init_indices(
            ab.detach().cpu().double().numpy(), num_clusters, seed
        )
        centroids = ab[torch.as_tensor(idx.copy(), device=ab.device)]
    for _ in range(iterations):
        d2 = torch.cdist(ab, centroids) ** 2
        assign = torch.softmax(-d2 / temperature, dim=1)
        mass = assign.sum(dim=0)  # strictly positive: softmax rows are positive
        centroids = (assign.T @ ab) / mass[:, None]
    d2 = torch.cdist(ab, centroids) ** 2
    assign = torch.softmax(-d2 / temperature, dim=1)
    return ColourSegmentationMap(
        assignments=assign.reshape(h, w, num_clusters),
        centroids=centroids,
        temperature=temperature,
    )


def reassign_segments(
    lab: Tensor, centroids: Tensor, temperature: float
) -> ColourSegmentationMap:
    """Soft assignments of an image's (a, b) pixels to fixed centroids.

    Used by the consistency loss: keeping the centroids pinned to the
    original bundle's keeps the re-extracted map cluster-aligned and makes
    re-extraction exact when the input is unchanged.
    """
    h, w = lab.shape[0], lab.shape[1]
    ab = lab[..., 1:].reshape(-1, 2)
    centroids = centroids.to(dtype=ab.dtype, device=ab.device)
    d2 = torch.cdist(ab, centroids) ** 2
    assign = torch.softmax(-d2 / temperature, dim=1)
    return ColourSegmentationMap(
        assignments=assign.reshape(h, w, centroids.shape[0]),
        centroids=centroids,
        temperature=temperature,
    )


def render_segmentation(seg: ColourSegmentationMap) -> SegmentationRender:
    """Assignment-weighted centroid colour per pixel, plus an RGB preview."""
    ab = torch.einsum("hwk,kc->hwc", seg.assignments, seg.centroids)
    L = torch.full_like(ab[..., :1], 50.0)
    display = lab_to_srgb(torch.cat([L, ab], dim=-1))
    return SegmentationRender(ab_render=ab, display_rgb=display)


def recolour_region(
    seg: ColourSegmentationMap, cluster_index: int, new_ab: tuple[float, float]
) -> ColourSegmentationMap:
    """Replace one centroid colour; assignments are untouched."""
    k = seg.num_clusters
    if not 0 <= cluster_index < k:
        raise IndexError(f"cluster_index {cluster_index} out of range [0, {k})")
    centroids = seg.centroids.clone()
    centroids[cluster_index] = torch.tensor(
        new_ab, dtype=centroids.dtype, device=centroids.device
    )
    return ColourSegmentationMap(
        assignments=seg.assignments, centroids=centroids, temperature=seg.temperature
    )


def shift_histogram(hist: GreyLevelHistogram, delta_L: float) -> GreyLevelHistogram:
    """Transport histogram mass by ``delta_L`` along the bin axis.

    Linear interpolation between neighbouring bins; mass pushed past the
    [0, 100] boundary piles up in the boundary bin.
    """
    nb = hist.num_bins
    width = float(hist.bin_centres[1] - hist.bin_centres[0])
    shift = delta_L / width
    pos = torch.arange(nb, dtype=hist.weights.dtype, device=hist.weights.device) + shift
    lo = torch.floor(pos)
    frac = pos - lo
    lo_idx = lo.long().clamp(0, nb - 1)
    hi_idx = (lo.long() + 1).clamp(0, nb - 1)
    out = torch.zeros_like(hist.weights)
    out.scatter_add_(0, lo_idx, hist.weights * (1.0 - frac))
    out.scatter_add_(0, hi_idx, hist.weights * frac)
    out = out / out.sum()
    return GreyLevelHistogram(
        weights=out, bin_centres=hist.bin_centres, bandwidth=hist.bandwidth
    )


def extract_bundle(rgb: Tensor, config: DescriptorConfig = DescriptorConfig()) -> DescriptorBundle:
    """All three descriptors from one shared LAB view of the image."""
    lab = rgb_to_lab_image(rgb)
    edges = extract_edges(lab)
    hist = extract_histogram(lab, config.num_bins, config.bandwidth)
    seg = extract_colour_segments(
        lab,
        config.num_clusters,
        iterations=config.kmeans_iterations,
        temperature=config.temperature,
        seed=config.seed,
    )
    return DescriptorBundle(
        edges=edges,
        segmentation=seg,
        histogram=hist,
        config=config,
        height=int(rgb.shape[0]),
        width=int(rgb.shape[1]),
    )


def apply_edits(bundle: DescriptorBundle, edits: list[dict]) -> DescriptorBundle:
    """Apply an ordered edit script to a bundle.

    Ops: {"op": "recolour", "cluster": int, "ab": [a, b]} and
         {"op": "shift_hist", "delta": float}.
    """
    for edit in edits:
        op = edit.get("op")
        if op == "recolour":
            seg = recolour_region(
                bundle.segmentation, int(edit["cluster"]), tuple(edit["ab"])
            )
            bundle = replace(bundle, segmentation=seg)
        elif op == "shift_hist":
            hist = shift_histogram(bundle.histogram, float(edit["delta"]))
            bundle = replace(bundle, histogram=hist)
        else:
            raise ValueError(f"unknown edit op {op!r}")
    return bundle


def encoder_planes(bundle: DescriptorBundle) -> Tensor:
    """(3, H, W) encoder input: normalized edge magnitude + scaled ab render.

    Built exclusively from descriptor fields; the raw image never enters.
    """
    render = render_segmentation(bundle.segmentation)
    edge = bundle.edges.normalized
    ab = render.ab_render / AB_SCALE
    return torch.stack([edge, ab[..., 0], ab[..., 1]], dim=0)
