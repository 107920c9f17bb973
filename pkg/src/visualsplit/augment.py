"""Photometric augmentation for desk-scale training.

Reconstruction from descriptors alone only exercises the histogram and
colour pathways if the training set contains images whose descriptors
actually differ along those axes. These helpers derive brightness-shifted,
hue-rotated, and recolour-edited variants from a handful of base images so
a small-scale run cannot simply memorize per-image photometry.
"""

from __future__ import annotations

import math
from dataclasses import replace

import torch
from torch import Tensor

from .color import lab_to_srgb, srgb_to_lab
from .descriptors import (
    DescriptorBundle,
    DescriptorConfig,
    extract_bundle,
    recolour_region,
)


def brightness_shift(img: Tensor, delta_L: float) -> Tensor:
    """Shift the LAB L channel by ``delta_L`` and convert back to RGB."""
    lab = srgb_to_lab(img).clone()
    lab[..., 0] = (lab[..., 0] + delta_L).clamp(0.0, 100.0)
    return lab_to_srgb(lab).clamp(0.0, 1.0)


def hue_rotate(img: Tensor, degrees: float) -> Tensor:
    """Rotate the (a, b) chroma plane by ``degrees``."""
    lab = srgb_to_lab(img).clone()
    th = math.radians(degrees)
    rot = torch.tensor(
        [[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]],
        dtype=lab.dtype,
        device=lab.device,
    )
    lab[..., 1:] = lab[..., 1:] @ rot.T
    return lab_to_srgb(lab).clamp(0.0, 1.0)


def recolour_pair(
    img: Tensor, bundle: DescriptorBundle, cluster: int, delta_ab: Tensor
) -> tuple[Tensor, DescriptorBundle]:
    """A (target image, edited bundle) supervision pair for a centroid edit.

    The target applies the assignment-weighted ab shift to the pixels, so the
    edited bundle's segmentation render matches the target exactly while the
    edge map and histogram stay those of the unedited image.
    """
    seg = bundle.segmentation
    old = seg.centroids[cluster]
    new = (old + delta_ab.to(old.dtype)).clamp(-80.0, 80.0)
    edited_seg = recolour_region(seg, cluster, (float(new[0]), float(new[1])))
    lab = srgb_to_lab(img).clone()
    lab[..., 1:] = lab[..., 1:] + seg.assignments[..., cluster : cluster + 1] * (new - old)
    target = lab_to_srgb(lab).clamp(0.0, 1.0)
    return target, replace(bundle, segmentation=edited_seg)


def photometric_pool(
    base_images: list[Tensor],
    config: DescriptorConfig,
    brightness_deltas: tuple[float, ...] = (-15.0, 0.0, 15.0),
    hue_degrees: tuple[float, ...] = (0.0, 120.0, 240.0),
    recolours_per_image: int = 0,
) -> tuple[Tensor, list[DescriptorBundle]]:
    """Expand base images into an augmented (images, bundles) training pool.

    ``recolours_per_image`` adds that many centroid-edit pairs per base image
    (two edit directions on the largest clusters).
    """
    pairs: list[tuple[Tensor, DescriptorBundle]] = []
    deltas = (torch.tensor([30.0, -30.0]), torch.tensor([-25.0, 20.0]))
    for img in base_images:
        bundle = extract_bundle(img, config)
        for delta in brightness_deltas:
            for deg in hue_degrees:
                variant = brightness_shift(img, delta)
                if deg:
                    variant = hue_rotate(variant, deg)
                pairs.append((variant, extract_bundle(variant, config)))
        if recolours_per_image:
            counts = torch.bincount(
                bundle.segmentation.argmax_labels().flatten(),
                minlength=config.num_clusters,
            )
            top = counts.argsort(descending=True)
            for j in range(recolours_per_image):
                cluster = int(top[j // len(deltas) % len(top)])
                pairs.append(recolour_pair(img, bundle, cluster, deltas[j % len(deltas)]))
    images = torch.stack([p[0] for p in pairs])
    return images, [p[1] for p in pairs]
