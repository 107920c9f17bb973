"""Reconstruction metrics, linear/finetune probes, input-independence
measurements, and the cluster-count sweep harness."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from torch import Tensor

from .data import list_image_folder, prepare_batch
from .descriptors import (
    DescriptorBundle,
    DescriptorConfig,
    encoder_planes,
    extract_bundle,
    extract_edges,
    shift_histogram,
    srgb_to_lab,
)
from .model import VisualSplitModel
from .training import TrainConfig, run_training

log = logging.getLogger(__name__)

# Linear-probing accuracies reported for the paper-scale cluster sweep
# (reference context only; not reproducible at desk scale).
PAPER_SWEEP_REFERENCE = {"accuracies": [60.0, 67.1, 74.0, 73.4], "best_k": 6}


@dataclass
class MetricReport:
    psnr: float = math.nan
    ssim: float = math.nan
    accuracy: float = math.nan
    per_class: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "psnr": self.psnr,
            "ssim": self.ssim,
            "accuracy": self.accuracy,
            "per_class": self.per_class,
        }


def psnr(a: Tensor, b: Tensor) -> float:
    """10*log10(1/MSE) for [0,1] images; +inf when identical."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    mse = float(((a - b) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float, dtype, device) -> Tensor:
    x = torch.arange(size, dtype=dtype, device=device) - (size - 1) / 2.0
    g = torch.exp(-(x * x) / (2.0 * sigma * sigma))
    g = g / g.sum()
    return torch.outer(g, g)


def ssim(a: Tensor, b: Tensor, window: int = 11, sigma: float = 1.5) -> float:
    """Mean local SSIM with an 11x11 Gaussian window, channel-averaged,
    standard stabilizers for [0,1]-range images."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.shape[0] < window or a.shape[1] < window:
        raise ValueError(f"images smaller than the {window}x{window} SSIM window")
    c1, c2 = 0.01**2, 0.03**2
    x = a.permute(2, 0, 1).unsqueeze(1)  # (C, 1, H, W)
    y = b.permute(2, 0, 1).unsqueeze(1)
    w = _gaussian_window(window, sigma, a.dtype, a.device)[None, None]
    conv = lambda t: torch.nn.functional.conv2d(t, w)
    mx, my = conv(x), conv(y)
    sxx = conv(x * x) - mx * mx
    syy = conv(y * y) - my * my
    sxy = conv(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float((num / den).mean())


def parameter_hash(module: nn.Module) -> str:
    h = hashlib.sha256()
    for name, p in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(p.detach().cpu().numpy().tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class ProbeConfig:
    mode: str = "linear"  # linear | finetune
    representation: str = "global"  # global | mean_local
    epochs: int = 30
    lr: float = 0.01
    batch_size: int = 32
    image_size: int = 64
    seed: int = 0
    train_fraction: float = 1.0  # 1.0 = train and evaluate on the full set

    def __post_init__(self):
        if self.mode not in ("linear", "finetune"):
            raise ValueError("mode must be 'linear' or 'finetune'")
        if self.representation not in ("global", "mean_local"):
            raise ValueError("representation must be 'global' or 'mean_local'")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must be in (0, 1]")


def _representation(model: VisualSplitModel, planes: Tensor, hist: Tensor, which: str) -> Tensor:
    rep = model.encoder(planes, hist)
    if which == "global":
        return rep.global_rep
    return rep.local_reps.mean(dim=1)


def probe(
    model: VisualSplitModel,
    dataset_root: str | Path,
    config: ProbeConfig,
    descriptor_config: DescriptorConfig = DescriptorConfig(),
) -> MetricReport:
    """Train a classification head on encoder representations.

    Linear mode freezes the encoder (verified by parameter hash); finetune
    mode updates it together with the head. With train_fraction < 1 the head
    is fit on the first ceil(fraction * n) path-sorted samples of each class
    and accuracy is reported on the held-out remainder.
    """
    items = list_image_folder(dataset_root)
    classes = sorted({name for _, _, name in items})
    labels = torch.tensor([idx for _, idx, _ in items])
    num_classes = len(classes)
    if num_classes < 2:
        raise ValueError("probing needs at least 2 classes")

    images, bundles = prepare_batch(
        [p for p, _, _ in items], config.image_size, descriptor_config
    )
    planes = torch.stack([encoder_planes(b) for b in bundles])
    hist = torch.stack([b.histogram.weights for b in bundles])

    if config.train_fraction < 1.0:
        train_mask = torch.zeros(len(labels), dtype=torch.bool)
        for c in range(num_classes):
            idx = (labels == c).nonzero().flatten()
            n_train = math.ceil(config.train_fraction * len(idx))
            train_mask[idx[:n_train]] = True
        if train_mask.all() or not train_mask.any():
            raise ValueError("train_fraction leaves an empty split")
        eval_mask = ~train_mask
    else:
        train_mask = eval_mask = torch.ones(len(labels), dtype=torch.bool)
    train_idx = train_mask.nonzero().flatten()

    gen = torch.Generator().manual_seed(config.seed)
    head = nn.Linear(model.encoder_config.embed_dim, num_classes)
    with torch.no_grad():
        head.weight.normal_(0, 0.01, generator=gen)
        head.bias.zero_()

    if config.mode == "linear":
        model.eval()
        with torch.no_grad():
            feats = _representation(model, planes, hist, config.representation)
        mean, std = feats[train_idx].mean(0), feats[train_idx].std(0)
        feats = (feats - mean) / (std + 1e-6)
        opt = torch.optim.Adam(head.parameters(), lr=config.lr)
        for _ in range(config.epochs):
            opt.zero_grad()
            loss = nn.functional.cross_entropy(head(feats[train_idx]), labels[train_idx])
            loss.backward()
            opt.step()
        preds = head(feats).argmax(dim=1)
    else:
        params = list(model.encoder.parameters()) + list(head.parameters())
        opt = torch.optim.Adam(params, lr=config.lr)
        n = len(train_idx)
        for epoch in range(config.epochs):
            perm = train_idx[torch.randperm(n, generator=gen)]
            for start in range(0, n, config.batch_size):
                idx = perm[start : start + config.batch_size]
                opt.zero_grad()
                out = head(_representation(model, planes[idx], hist[idx], config.representation))
                nn.functional.cross_entropy(out, labels[idx]).backward()
                opt.step()
        with torch.no_grad():
            preds = head(
                _representation(model, planes, hist, config.representation)
            ).argmax(dim=1)

    hits = (preds == labels)[eval_mask]
    acc = float(hits.float().mean())
    per_class = {
        name: float((preds[eval_mask & (labels == i)] == i).float().mean())
        if (eval_mask & (labels == i)).any()
        else math.nan
        for i, name in enumerate(classes)
    }
    return MetricReport(accuracy=acc, per_class=per_class)


def reconstruct_with_histogram_shift(
    model: VisualSplitModel, bundle: DescriptorBundle, delta_L: float
) -> Tensor:
    shifted = replace(bundle, histogram=shift_histogram(bundle.histogram, delta_L))
    with torch.no_grad():
        return model.reconstruct_bundle(shifted)


def input_independence_report(
    model: VisualSplitModel,
    image: Tensor,
    delta_Ls: list[float],
    descriptor_config: DescriptorConfig = DescriptorConfig(),
) -> dict:
    """Reconstruct with brightness-shifted histograms (edges and colour map
    held fixed); report mean reconstructed L per shift and the edge-map L1
    distance of each variant to the unshifted reconstruction."""
    bundle = extract_bundle(image, descriptor_config)
    baseline = reconstruct_with_histogram_shift(model, bundle, 0.0)
    base_edges = extract_edges(srgb_to_lab(baseline)).normalized
    rows = []
    for delta in delta_Ls:
        recon = reconstruct_with_histogram_shift(model, bundle, delta)
        lab = srgb_to_lab(recon)
        edges = extract_edges(lab).normalized
        rows.append(
            {
                "delta_L": float(delta),
                "mean_L": float(lab[..., 0].mean()),
                "edge_l1_vs_baseline": float((edges - base_edges).abs().mean()),
            }
        )
    return {"baseline_mean_L": float(srgb_to_lab(baseline)[..., 0].mean()), "rows": rows}


def sweep_clusters(
    ks: list[int],
    train_config: TrainConfig,
    probe_config: ProbeConfig,
    csv_path: str | Path | None = None,
) -> list[dict]:
    """Pretrain + linear-probe once per cluster count K; returns one row per
    K and optionally writes the CSV report."""
    if not ks:
        raise ValueError("Ks must be non-empty")
    rows = []
    for k in ks:
        cfg = replace(
            train_config,
            descriptor=replace(train_config.descriptor, num_clusters=k),
            out_dir=str(Path(train_config.out_dir) / f"sweep_k{k}"),
        )
        log.info("sweep: training with K=%d", k)
        trainer, _ = run_training(cfg)
        paths = [p for p, _, _ in list_image_folder(cfg.dataset_root)]
        images, bundles = prepare_batch(paths, cfg.image_size, cfg.descriptor)
        with torch.no_grad():
            psnrs, ssims = [], []
            for img, bundle in zip(images, bundles):
                recon = trainer.model.reconstruct_bundle(bundle)
                psnrs.append(psnr(recon, img))
                ssims.append(ssim(recon, img))
        report = probe(trainer.model, cfg.dataset_root, probe_config, cfg.descriptor)
        rows.append(
            {
                "K": k,
                "accuracy": report.accuracy,
                "psnr": float(np.mean([p for p in psnrs if math.isfinite(p)])),
                "ssim": float(np.mean(ssims)),
            }
        )
    if csv_path is not None:
        with open(csv_path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["K", "accuracy", "psnr", "ssim"])
            writer.writeheader()
            writer.writerows(rows)
    return rows
