"""PNG renderings of descriptors and reconstructions."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib
import numpy as np
from PIL import Image
from torch import Tensor

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .descriptors import DescriptorBundle, render_segmentation  # noqa: E402


def to_pil(img: Tensor) -> Image.Image:
    """(H, W) or (H, W, 3) tensor in [0, 1] -> PIL image."""
    arr = img.detach().cpu().numpy()
    arr = (np.clip(arr, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    return Image.fromarray(arr)


def save_image(img: Tensor, path: str | Path) -> None:
    to_pil(img).save(path)


def image_png_bytes(img: Tensor) -> bytes:
    buf = io.BytesIO()
    to_pil(img).save(buf, format="PNG")
    return buf.getvalue()


def save_histogram_plot(bundle_or_hist, path: str | Path) -> None:
    hist = getattr(bundle_or_hist, "histogram", bundle_or_hist)
    centres = hist.bin_centres.detach().cpu().numpy()
    weights = hist.weights.detach().cpu().numpy()
    fig, ax = plt.subplots(figsize=(4, 2.5), dpi=120)
    ax.bar(centres, weights, width=float(centres[1] - centres[0]), color="0.3")
    ax.set_xlabel("grey level (L)")
    ax.set_ylabel("weight")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_descriptor_previews(bundle: DescriptorBundle, stem: str | Path) -> list[Path]:
    """Write <stem>_edges.png, <stem>_segments.png, <stem>_histogram.png."""
    stem = Path(stem)
    paths = [
        stem.with_name(stem.name + "_edges.png"),
        stem.with_name(stem.name + "_segments.png"),
        stem.with_name(stem.name + "_histogram.png"),
    ]
    save_image(bundle.edges.normalized.clamp(0, 1) ** 0.5, paths[0])
    save_image(render_segmentation(bundle.segmentation).display_rgb, paths[1])
    save_histogram_plot(bundle, paths[2])
    return paths
