"""Image ingestion: folder datasets, resize/centre-crop, bundle extraction."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch import Tensor

from .descriptors import DescriptorBundle, DescriptorConfig, extract_bundle

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


def load_image(path: str | Path) -> Tensor:
    """Decode an image file to an (H, W, 3) float tensor in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr)


def resize_centre_crop(img: Tensor, size: int) -> Tensor:
    """Resize the shorter side to ``size`` (bilinear), then centre-crop a
    ``size`` x ``size`` square."""
    h, w = img.shape[0], img.shape[1]
    if h <= w:
        nh, nw = size, max(size, round(w * size / h))
    else:
        nh, nw = max(size, round(h * size / w)), size
    x = img.permute(2, 0, 1).unsqueeze(0)
    x = torch.nn.functional.interpolate(
        x, size=(nh, nw), mode="bilinear", align_corners=False, antialias=True
    )
    top = (nh - size) // 2
    left = (nw - size) // 2
    out = x[0, :, top : top + size, left : left + size].permute(1, 2, 0)
    return out.clamp(0.0, 1.0).contiguous()


def prepare_image(path: str | Path, size: int) -> Tensor:
    return resize_centre_crop(load_image(path), size)


def prepare_batch(
    paths: list[str | Path], size: int, descriptor_config: DescriptorConfig
) -> tuple[Tensor, list[DescriptorBundle]]:
    """Load, crop and extract descriptor bundles for a batch of files.

    Unreadable files are skipped with a warning; an empty result is an error.
    """
    images, bundles = [], []
    for path in paths:
        try:
            img = prepare_image(path, size)
        except (OSError, ValueError) as e:
            log.warning("skipping unreadable image %s: %s", path, e)
            continue
        images.append(img)
        bundles.append(extract_bundle(img, descriptor_config))
    if not images:
        raise ValueError("no readable images in batch")
    return torch.stack(images), bundles


def list_image_folder(root: str | Path) -> list[tuple[Path, int, str]]:
    """Folder-per-class layout -> sorted (path, label_index, class_name)."""
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset root {root} is not a directory")
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    items = []
    if classes:
        for idx, name in enumerate(classes):
            for f in sorted((root / name).iterdir()):
                if f.suffix.lower() in IMAGE_EXTENSIONS:
                    items.append((f, idx, name))
    else:
        for f in sorted(root.iterdir()):
            if f.suffix.lower() in IMAGE_EXTENSIONS:
                items.append((f, 0, ""))
    if not items:
        raise ValueError(f"no images found under {root}")
    return items
