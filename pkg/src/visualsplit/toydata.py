"""Synthetic folder-per-class datasets for desk-scale probing experiments.

Class identity is geometric — stripe frequency and orientation — while the
colour pair of each sample is drawn from a pool shared by all classes, so
colour statistics carry no class signal. Per-sample phase jitter and pixel
noise keep images within a class from being trivially identical.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import torch
from PIL import Image

# (bright colour, dark colour) pairs shared across all classes, RGB in [0, 1]
COLOUR_POOL: list[tuple[tuple[float, float, float], tuple[float, float, float]]] = [
    ((0.90, 0.30, 0.20), (0.10, 0.20, 0.50)),
    ((0.30, 0.80, 0.30), (0.50, 0.20, 0.60)),
    ((0.90, 0.80, 0.20), (0.20, 0.30, 0.30)),
]

MAX_CLASSES = 10


def toy_class_image(cls: int, sample: int, size: int = 64) -> np.ndarray:
    """One (size, size, 3) float32 image of class ``cls``; deterministic in
    (cls, sample). Classes 0-4 are horizontal stripes at frequency cls+1,
    classes 5-9 vertical stripes at frequency cls-4."""
    if not 0 <= cls < MAX_CLASSES:
        raise ValueError(f"cls must be in [0, {MAX_CLASSES})")
    rng = np.random.default_rng(9000 + 131 * cls + sample)
    yy, xx = np.meshgrid(
        np.linspace(0.0, 1.0, size), np.linspace(0.0, 1.0, size), indexing="ij"
    )
    freq = (cls % 5) + 1
    axis = yy if cls < MAX_CLASSES // 2 else xx
    wave = 0.5 + 0.5 * np.sin(2 * np.pi * (freq * axis + rng.uniform(0.0, 1.0)))
    bright, dark = COLOUR_POOL[int(rng.integers(0, len(COLOUR_POOL)))]
    img = wave[..., None] * np.asarray(bright) + (1.0 - wave[..., None]) * np.asarray(dark)
    img += rng.normal(0.0, 0.02, img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


_DESK_PALETTES = [
    ([0.85, 0.2, 0.25], [0.2, 0.45, 0.8], [0.9, 0.75, 0.2]),
    ([0.2, 0.6, 0.3], [0.8, 0.3, 0.6], [0.25, 0.7, 0.75]),
    ([0.8, 0.45, 0.15], [0.3, 0.35, 0.75], [0.75, 0.2, 0.2]),
    ([0.25, 0.55, 0.7], [0.85, 0.65, 0.2], [0.5, 0.25, 0.65]),
]


def desk_scene(i: int, size: int = 64) -> torch.Tensor:
    """Deterministic synthetic desk scene: gradient wall, desk surface, and
    three solid-colour objects (book, mug, note) whose colours and positions
    vary with ``i``. The coherent colour regions segment into compact blobs,
    which is what makes centroid recolouring a meaningful localized edit."""
    y, x = torch.meshgrid(
        torch.linspace(0, 1, size), torch.linspace(0, 1, size), indexing="ij"
    )
    img = torch.stack(
        [
            0.55 + 0.1 * y,
            0.5 + 0.05 * torch.sin(2 * math.pi * (x + 0.2 * i)),
            0.45 + 0.1 * x,
        ],
        dim=-1,
    )
    desk_top = 5 * size // 8
    img[desk_top:, :, :] = torch.tensor([0.45, 0.3, 0.2]) + 0.1 * y[desk_top:, :, None]
    book, mug, note = (torch.tensor(c) for c in _DESK_PALETTES[i % len(_DESK_PALETTES)])
    s = size / 64.0
    r0, c0 = round((26 + 2 * i) * s), round((8 + 3 * i) * s)
    img[r0 : r0 + round(22 * s), c0 : c0 + round(16 * s), :] = book
    cy, cx = (34 - i) * s, (44 - 2 * i) * s
    dist = (y * (size - 1) - cy) ** 2 + (x * (size - 1) - cx) ** 2
    img[dist < (9 * s) ** 2] = mug
    img[round((12 + i) * s) : round((22 + i) * s), round(36 * s) : round(52 * s), :] = note
    return img.clamp(0, 1).contiguous()


def write_toy_dataset(
    root: str | Path, num_classes: int = 10, per_class: int = 6, size: int = 64
) -> Path:
    """Write a folder-per-class PNG dataset under ``root`` and return it."""
    if not 2 <= num_classes <= MAX_CLASSES:
        raise ValueError(f"num_classes must be in [2, {MAX_CLASSES}]")
    root = Path(root)
    for cls in range(num_classes):
        class_dir = root / f"class_{cls:02d}"
        class_dir.mkdir(parents=True, exist_ok=True)
        for sample in range(per_class):
            arr = (toy_class_image(cls, sample, size) * 255.0).round().astype(np.uint8)
            Image.fromarray(arr).save(class_dir / f"img_{sample:02d}.png")
    return root
